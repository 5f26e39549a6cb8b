//! Ising problem instances: construction, the fixed 8-qubit benchmark,
//! seeded random generation and JSON persistence.
//!
//! The on-disk format is a single JSON document
//! `{"n": <int>, "J": [[...], ...]}` holding the full row-major coupling
//! matrix. The loader checks shape, finiteness, symmetry and a zero diagonal.

use std::fs;
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All-to-all Ising couplings `J_ij` on `n` spins.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    n: usize,
    couplings: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    #[serde(rename = "J")]
    couplings: Vec<Vec<f64>>,
}

/// The benchmark couplings, rounded to three decimals.
const BENCHMARK_COUPLINGS: [[f64; 8]; 8] = [
    [0.0, 0.526, 0.852, 0.832, 0.718, -0.084, 0.702, 0.609],
    [0.526, 0.0, 0.129, -0.951, 0.432, 0.250, 0.490, 0.402],
    [0.852, 0.129, 0.0, 0.243, 0.708, -0.648, 0.753, -0.743],
    [0.832, -0.951, 0.243, 0.0, -0.320, 0.000, 0.910, -0.002],
    [0.718, 0.432, 0.708, -0.320, 0.0, 0.346, -0.801, -0.476],
    [-0.084, 0.250, -0.648, 0.000, 0.346, 0.0, 0.149, -0.278],
    [0.702, 0.490, 0.753, 0.910, -0.801, 0.149, 0.0, 0.509],
    [0.609, 0.402, -0.743, -0.002, -0.476, -0.278, 0.509, 0.0],
];

impl ProblemInstance {
    /// Builds an instance from a row-major `n × n` coupling matrix.
    pub fn new(n: usize, couplings: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("qubit count must be positive".into()));
        }
        if couplings.len() != n * n {
            return Err(Error::Validation(format!(
                "expected {} coupling entries for n = {n}, got {}",
                n * n,
                couplings.len()
            )));
        }
        let inst = Self { n, couplings };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let v = self.coupling(i, j);
                if !v.is_finite() {
                    return Err(Error::Validation(format!("J[{i}][{j}] is not finite")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::Validation(format!("J[{i}][{i}] = {v} must be zero")));
                }
                if v != self.coupling(j, i) {
                    return Err(Error::Validation(format!(
                        "J[{i}][{j}] = {v} differs from J[{j}][{i}] = {}",
                        self.coupling(j, i)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    /// Row-major view of the full coupling matrix.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Classical cost `Σ_{i<j} J_ij z_i z_j` of a computational basis state.
    ///
    /// Bit `i` of `bits` set means `z_i = -1`.
    pub fn cost(&self, bits: usize) -> f64 {
        let spin = |i: usize| if (bits >> i) & 1 == 1 { -1.0 } else { 1.0 };
        let mut total = 0.0;
        for i in 0..self.n {
            let zi = spin(i);
            for j in (i + 1)..self.n {
                total += self.coupling(i, j) * zi * spin(j);
            }
        }
        total
    }

    /// FNV-1a digest over the bit patterns of `n` and the couplings.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.n as u64);
        for &v in &self.couplings {
            feed(v.to_bits());
        }
        format!("{h:016x}")
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            couplings: self.couplings.chunks(self.n).map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if file.couplings.len() != file.n {
            return Err(Error::Parse {
                location: "field J".into(),
                message: format!("expected {} rows, found {}", file.n, file.couplings.len()),
            });
        }
        let mut flat = Vec::with_capacity(file.n * file.n);
        for (i, row) in file.couplings.iter().enumerate() {
            if row.len() != file.n {
                return Err(Error::Parse {
                    location: format!("field J, row {i}"),
                    message: format!("expected {} entries, found {}", file.n, row.len()),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::new(file.n, flat)
    }
}

/// The fixed 8-qubit benchmark instance.
pub fn appendix_d_instance() -> ProblemInstance {
    let couplings = BENCHMARK_COUPLINGS.iter().flatten().copied().collect();
    ProblemInstance::new(8, couplings).expect("benchmark couplings are valid")
}

/// Couplings drawn i.i.d. uniform on `[-1, 1)`.
///
/// Stream: `Xoshiro256PlusPlus::seed_from_u64(seed)` (SplitMix64 seed
/// expansion). The upper triangle is filled row-major (`i < j`, `j` fastest);
/// each entry consumes one `u64`, mapped as `2 * (x >> 11) * 2^-53 - 1`, and
/// is mirrored into the lower triangle.
pub fn random_instance(n: usize, seed: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("random instances need n >= 2, got {n}")));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut couplings = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let v = 2.0 * unit - 1.0;
            couplings[i * n + j] = v;
            couplings[j * n + i] = v;
        }
    }
    ProblemInstance::new(n, couplings)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ProblemInstance::from_json(&text)
}

pub fn save_instance(instance: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance.to_json() + "\n").map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
