//! One-class detector: a principal-subspace reconstruction model fitted on
//! bona fide cubes only. Samples far from the subspace score low.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{read_record, write_record, CubeError, SampleCube, Shape};

pub const DEFAULT_K: usize = 8;
const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OneClassError {
    #[error("need at least {needed} training cubes, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("latent dimension must be at least 1")]
    InvalidK,
    #[error("bad model file: {0}")]
    Format(String),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    pub shape: Shape,
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `shape.len()`.
    pub basis: Vec<Vec<f64>>,
    pub trained_on: usize,
    pub score_scale: f64,
    /// Share of the centered training variance captured by the basis.
    pub captured_variance: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    kind: String,
    k: usize,
    bands: usize,
    h: usize,
    w: usize,
    trained_on: usize,
    score_scale: f64,
    captured_variance: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt in place. A row that collapses is replaced by the
/// first unit vector that is not (numerically) in the span of the others.
pub fn orthonormalize(rows: &mut [Vec<f64>]) {
    let d = rows.first().map_or(0, Vec::len);
    let mut next_unit = 0usize;
    for i in 0..rows.len() {
        loop {
            for j in 0..i {
                let (done, rest) = rows.split_at_mut(i);
                let p = dot(&rest[0], &done[j]);
                for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                    *x -= p * q;
                }
            }
            let norm = dot(&rows[i], &rows[i]).sqrt();
            if norm > 1e-10 {
                for x in rows[i].iter_mut() {
                    *x /= norm;
                }
                break;
            }
            assert!(next_unit < d, "cannot complete an orthonormal basis");
            rows[i] = vec![0.0; d];
            rows[i][next_unit] = 1.0;
            next_unit += 1;
        }
    }
}

fn check_shape(expected: Shape, found: Shape) -> Result<(), OneClassError> {
    if expected == found {
        Ok(())
    } else {
        Err(OneClassError::ShapeMismatch { expected, found })
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Fits the top-`k` principal subspace of the flattened cubes.
pub fn train(cubes: &[SampleCube], k: usize) -> Result<SubspaceModel, OneClassError> {
    if k == 0 {
        return Err(OneClassError::InvalidK);
    }
    if cubes.len() < k + 1 {
        return Err(OneClassError::TooFewSamples {
            needed: k + 1,
            got: cubes.len(),
        });
    }
    let shape = cubes[0].shape;
    for c in cubes {
        check_shape(shape, c.shape)?;
    }
    let (n, d) = (cubes.len(), shape.len());
    if k > d {
        return Err(OneClassError::TooFewSamples { needed: k, got: d });
    }

    let mut mean = vec![0.0; d];
    for c in cubes {
        for (m, &v) in mean.iter_mut().zip(&c.data) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let x = DMatrix::from_fn(n, d, |i, j| f64::from(cubes[i].data[j]) - mean[j]);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let top: f64 = order.iter().take(k).map(|&i| svd.singular_values[i].powi(2)).sum();
    let captured_variance = if total > 0.0 { top / total } else { 1.0 };

    let mut basis: Vec<Vec<f64>> = order
        .iter()
        .take(k)
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    // Wide data with n - 1 < k leaves fewer singular vectors than requested.
    while basis.len() < k {
        basis.push(vec![0.0; d]);
    }
    orthonormalize(&mut basis);

    let mut model = SubspaceModel {
        shape,
        mean,
        basis,
        trained_on: n,
        score_scale: 1.0,
        captured_variance,
    };
    let mut errors: Vec<f64> = cubes.iter().map(|c| model.reconstruction_error(c)).collect::<Result<_, _>>()?;
    model.score_scale = median(&mut errors).max(SCALE_FLOOR);
    Ok(model)
}

impl SubspaceModel {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    /// Mean squared residual of `values` after projection onto the affine
    /// subspace.
    pub fn reconstruction_error_of(&self, values: &[f64]) -> f64 {
        let mut r: Vec<f64> = values.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for b in &self.basis {
            let c = dot(&r, b);
            for (x, q) in r.iter_mut().zip(b) {
                *x -= c * q;
            }
        }
        dot(&r, &r) / r.len() as f64
    }

    pub fn reconstruction_error(&self, cube: &SampleCube) -> Result<f64, OneClassError> {
        check_shape(self.shape, cube.shape)?;
        Ok(self.reconstruction_error_of(&cube.to_f64()))
    }

    /// `-(error / score_scale)`; higher means more bona fide, 0 at best.
    pub fn score(&self, cube: &SampleCube) -> Result<f64, OneClassError> {
        Ok(-(self.reconstruction_error(cube)? / self.score_scale))
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    /// Writes a JSON meta line followed by container records `mean` and
    /// `basis/<i>` as 32-bit floats.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OneClassError> {
        let meta = ModelMeta {
            kind: "subspace".into(),
            k: self.k(),
            bands: self.shape.bands,
            h: self.shape.h,
            w: self.shape.w,
            trained_on: self.trained_on,
            score_scale: self.score_scale,
            captured_variance: self.captured_variance,
        };
        let mut bytes = serde_json::to_vec(&meta).map_err(|e| OneClassError::Format(e.to_string()))?;
        bytes.push(b'\n');
        let mut w = BufWriter::new(&mut bytes);
        let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        write_record(&mut w, "mean", self.shape, &to_f32(&self.mean))?;
        for (i, b) in self.basis.iter().enumerate() {
            write_record(&mut w, &format!("basis/{i}"), self.shape, &to_f32(b))?;
        }
        w.flush()?;
        drop(w);
        crate::io::write_atomic(path.as_ref(), &bytes)?;
        Ok(())
    }

    /// Loads a saved model; the basis is re-orthonormalized in f64.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OneClassError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let meta: ModelMeta = serde_json::from_str(line.trim_end()).map_err(|e| OneClassError::Format(e.to_string()))?;
        if meta.kind != "subspace" {
            return Err(OneClassError::Format(format!("unknown model kind `{}`", meta.kind)));
        }
        let shape = Shape {
            bands: meta.bands,
            h: meta.h,
            w: meta.w,
        };
        let mut read = |expected: &str| -> Result<Vec<f64>, OneClassError> {
            let (id, found, data) =
                read_record(&mut r)?.ok_or_else(|| OneClassError::Format(format!("missing record `{expected}`")))?;
            if id != expected {
                return Err(OneClassError::Format(format!("expected record `{expected}`, found `{id}`")));
            }
            check_shape(shape, found)?;
            Ok(data.into_iter().map(f64::from).collect())
        };
        let mean = read("mean")?;
        let mut basis = (0..meta.k)
            .map(|i| read(&format!("basis/{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        orthonormalize(&mut basis);
        Ok(SubspaceModel {
            shape,
            mean,
            basis,
            trained_on: meta.trained_on,
            score_scale: meta.score_scale,
            captured_variance: meta.captured_variance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_cubes(n: usize, shape: Shape, seed: u64) -> Vec<SampleCube> {
        let mut r = rng::stream(seed, "test/cubes");
        (0..n)
            .map(|_| SampleCube::new(shape, (0..shape.len()).map(|_| r.random::<f32>()).collect()))
            .collect()
    }

    const SMALL: Shape = Shape { bands: 2, h: 3, w: 4 };

    #[test]
    fn identical_cubes_reconstruct_exactly() {
        let cube = SampleCube::new(SMALL, vec![0.3; SMALL.len()]);
        let cubes = vec![cube.clone(); 5];
        for k in 1..=4 {
            let m = train(&cubes, k).unwrap();
            assert_eq!(m.reconstruction_error(&cube).unwrap(), 0.0);
            assert!(m.orthonormality_error() < 1e-12);
            assert_eq!(m.score_scale, SCALE_FLOOR);
        }
    }

    #[test]
    fn full_rank_span_reconstructs_training_data() {
        let cubes = random_cubes(6, SMALL, 1);
        let m = train(&cubes, 5).unwrap();
        let scale: f64 = cubes[0].to_f64().iter().map(|x| x * x).sum::<f64>() / SMALL.len() as f64;
        for c in &cubes {
            assert!(m.reconstruction_error(c).unwrap() < 1e-8 * scale);
        }
        assert!((m.captured_variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_scores_zero_and_everything_else_below() {
        let cubes = random_cubes(10, SMALL, 2);
        let m = train(&cubes, 3).unwrap();
        let mean = SampleCube::new(SMALL, m.mean.iter().map(|&x| x as f32).collect());
        assert!(m.score(&mean).unwrap().abs() < 1e-10);
        for c in random_cubes(5, SMALL, 3) {
            assert!(m.score(&c).unwrap() < 0.0);
        }
    }

    #[test]
    fn orthogonal_offset_scales_linearly() {
        let cubes = random_cubes(10, SMALL, 4);
        let m = train(&cubes, 3).unwrap();
        let mut extra = vec![vec![0.0; SMALL.len()]; 4];
        extra[..3].clone_from_slice(&m.basis);
        extra[3][0] = 1.0;
        orthonormalize(&mut extra);
        let u = &extra[3];
        for n in [1.0, 2.5, 7.0] {
            // squared norm n * score_scale * d gives mse n * score_scale
            let len = (n * m.score_scale * SMALL.len() as f64).sqrt();
            let x: Vec<f64> = m.mean.iter().zip(u).map(|(a, b)| a + len * b).collect();
            let s = -(m.reconstruction_error_of(&x) / m.score_scale);
            assert!((s + n).abs() < 1e-9, "{s} vs -{n}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let cubes = random_cubes(3, SMALL, 5);
        assert!(matches!(train(&cubes, 3), Err(OneClassError::TooFewSamples { needed: 4, got: 3 })));
        assert!(matches!(train(&cubes, 0), Err(OneClassError::InvalidK)));
        let mut mixed = cubes.clone();
        mixed.push(SampleCube::new(Shape { bands: 1, h: 3, w: 4 }, vec![0.0; 12]));
        assert!(matches!(train(&mixed, 1), Err(OneClassError::ShapeMismatch { .. })));
        let m = train(&cubes, 1).unwrap();
        let other = SampleCube::new(Shape { bands: 1, h: 1, w: 1 }, vec![0.0]);
        assert!(matches!(m.score(&other), Err(OneClassError::ShapeMismatch { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let cubes = random_cubes(12, SMALL, 6);
        let m = train(&cubes, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        m.save(&path).unwrap();
        let back = SubspaceModel::load(&path).unwrap();
        assert_eq!(back.k(), 4);
        assert_eq!(back.score_scale, m.score_scale);
        assert!(back.orthonormality_error() < 1e-12);
        for c in &cubes {
            let (a, b) = (m.score(c).unwrap(), back.score(c).unwrap());
            assert!((a - b).abs() < 1e-4 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let mut first = String::new();
        BufReader::new(File::open(&path).unwrap()).read_line(&mut first).unwrap();
        assert!(first.starts_with(r#"{"kind":"subspace","k":4,"bands":2,"h":3,"w":4,"trained_on":12,"#));
    }
}
