//! Interferer position estimates from per-cell evidence.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::propagation::{pathloss_db, Condition, PathlossQuery, MAX_D2D_M, MIN_D2D_M};
use crate::scenario::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalizationMethod {
    WeightedCentroid,
    PathlossLSQ,
}

/// One sensing cell: where it is and what it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cell_id: String,
    pub position: Point,
    /// Mean excess in dB for the centroid, interference level in dBm for LSQ.
    pub value_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEstimate {
    pub position: Point,
    pub method: LocalizationMethod,
    /// Weighted RMS distance (m) for the centroid, RMS fit error (dB) for LSQ.
    pub residual: f64,
    pub cells_used: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
    /// Set when LSQ could not run and the centroid was returned instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Excess-power-weighted mean of cell positions.
pub fn weighted_centroid(obs: &[Observation]) -> Result<LocalizationEstimate> {
    if obs.is_empty() {
        return Err(Error::InvalidArgument("weighted centroid needs at least one cell".into()));
    }
    // shift by the maximum so large excesses cannot overflow
    let top = obs.iter().map(|o| o.value_db).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = obs.iter().map(|o| 10f64.powf((o.value_db - top) / 10.0)).collect();
    let total: f64 = w.iter().sum();
    let x = obs.iter().zip(&w).map(|(o, w)| w * o.position.x).sum::<f64>() / total;
    let y = obs.iter().zip(&w).map(|(o, w)| w * o.position.y).sum::<f64>() / total;
    let position = Point::new(x, y);
    let residual = (obs
        .iter()
        .zip(&w)
        .map(|(o, w)| w * o.position.distance(&position).powi(2))
        .sum::<f64>()
        / total)
        .sqrt();
    Ok(LocalizationEstimate {
        position,
        method: LocalizationMethod::WeightedCentroid,
        residual,
        cells_used: obs.iter().map(|o| o.cell_id.clone()).collect(),
        tx_power_dbm: None,
        warning: None,
    })
}

/// Forward model for LSQ: omnidirectional source, NLOS pathloss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqModel {
    pub environment: Environment,
    pub fc_ghz: f64,
    /// Receiving cell antenna height.
    pub h_bs_m: f64,
    /// Source height.
    pub h_src_m: f64,
}

impl LsqModel {
    pub fn pathloss(&self, d2d_m: f64) -> f64 {
        pathloss_db(&PathlossQuery {
            d2d_m: d2d_m.clamp(MIN_D2D_M, MAX_D2D_M),
            fc_ghz: self.fc_ghz,
            h_bs_m: self.h_bs_m,
            h_ut_m: self.h_src_m,
            environment: self.environment,
            condition: Condition::Nlos,
        })
        .expect("model parameters checked before fitting")
    }

    fn check(&self) -> Result<()> {
        pathloss_db(&PathlossQuery {
            d2d_m: MIN_D2D_M,
            fc_ghz: self.fc_ghz,
            h_bs_m: self.h_bs_m,
            h_ut_m: self.h_src_m,
            environment: self.environment,
            condition: Condition::Nlos,
        })
        .map(|_| ())
    }
}

/// Transmit power that best explains `obs` for a source at `position`.
pub fn estimate_tx_power_dbm(obs: &[Observation], position: Point, model: &LsqModel) -> f64 {
    obs.iter()
        .map(|o| o.value_db + model.pathloss(o.position.distance(&position)))
        .sum::<f64>()
        / obs.len() as f64
}

/// Smallest-to-largest spread ratio of the positions; 0 for collinear sets.
fn planarity(obs: &[Observation]) -> f64 {
    let n = obs.len() as f64;
    let mx = obs.iter().map(|o| o.position.x).sum::<f64>() / n;
    let my = obs.iter().map(|o| o.position.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for o in obs {
        let (dx, dy) = (o.position.x - mx, o.position.y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let (hi, lo) = (tr / 2.0 + disc, (tr / 2.0 - disc).max(0.0));
    if hi <= 0.0 {
        0.0
    } else {
        (lo / hi).sqrt()
    }
}

/// Positions whose spread ratio falls below this are treated as collinear.
pub const COLLINEAR_RATIO: f64 = 1e-3;

const LM_MAX_ITER: usize = 200;
const GRID_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqStart {
    pub index: usize,
    pub start: Point,
    pub solution: Point,
    pub tx_power_dbm: f64,
    pub cost: f64,
}

fn residuals(obs: &[Observation], model: &LsqModel, p: &Vector3<f64>) -> Vec<f64> {
    let at = Point::new(p[0], p[1]);
    obs.iter()
        .map(|o| p[2] - model.pathloss(o.position.distance(&at)) - o.value_db)
        .collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn levenberg_marquardt(obs: &[Observation], model: &LsqModel, start: Vector3<f64>) -> (Vector3<f64>, f64) {
    let mut p = start;
    let mut r = residuals(obs, model, &p);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    const H: f64 = 1e-4;
    for _ in 0..LM_MAX_ITER {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        let rx = residuals(obs, model, &(p + Vector3::new(H, 0.0, 0.0)));
        let rx0 = residuals(obs, model, &(p - Vector3::new(H, 0.0, 0.0)));
        let ry = residuals(obs, model, &(p + Vector3::new(0.0, H, 0.0)));
        let ry0 = residuals(obs, model, &(p - Vector3::new(0.0, H, 0.0)));
        for i in 0..obs.len() {
            let j = Vector3::new((rx[i] - rx0[i]) / (2.0 * H), (ry[i] - ry0[i]) / (2.0 * H), 1.0);
            jtj += j * j.transpose();
            jtr += j * r[i];
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-9);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = p + step;
            let rc = residuals(obs, model, &cand);
            let cc = cost(&rc);
            if cc < c {
                let done = step.norm() < 1e-9 || (c - cc) <= 1e-15 * c.max(1e-300);
                p = cand;
                r = rc;
                c = cc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if done {
                    return (p, c);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, c)
}

/// Every start of the multi-start fit, in start order.
pub fn lsq_starts(obs: &[Observation], tx_power_guess_dbm: f64, model: &LsqModel) -> Vec<LsqStart> {
    let min_x = obs.iter().map(|o| o.position.x).fold(f64::INFINITY, f64::min);
    let max_x = obs.iter().map(|o| o.position.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = obs.iter().map(|o| o.position.y).fold(f64::INFINITY, f64::min);
    let max_y = obs.iter().map(|o| o.position.y).fold(f64::NEG_INFINITY, f64::max);
    let mut starts = Vec::with_capacity(GRID_STARTS * GRID_STARTS + 1);
    for iy in 0..GRID_STARTS {
        for ix in 0..GRID_STARTS {
            let fx = ix as f64 / (GRID_STARTS - 1) as f64;
            let fy = iy as f64 / (GRID_STARTS - 1) as f64;
            starts.push(Point::new(min_x + fx * (max_x - min_x), min_y + fy * (max_y - min_y)));
        }
    }
    let n = obs.len() as f64;
    starts.push(Point::new(
        obs.iter().map(|o| o.position.x).sum::<f64>() / n,
        obs.iter().map(|o| o.position.y).sum::<f64>() / n,
    ));
    starts
        .into_par_iter()
        .enumerate()
        .map(|(index, start)| {
            let (p, c) = levenberg_marquardt(obs, model, Vector3::new(start.x, start.y, tx_power_guess_dbm));
            LsqStart {
                index,
                start,
                solution: Point::new(p[0], p[1]),
                tx_power_dbm: p[2],
                cost: c,
            }
        })
        .collect()
}

/// Fit `(x, y, P)` so that `P - PL(d_i)` matches each observed level.
///
/// Needs at least three cells. Collinear or co-located cells fall back to the
/// weighted centroid with a warning.
pub fn pathloss_lsq(obs: &[Observation], tx_power_guess_dbm: f64, model: &LsqModel) -> Result<LocalizationEstimate> {
    if obs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "pathloss LSQ needs at least 3 cells, got {}",
            obs.len()
        )));
    }
    model.check()?;
    if obs.iter().any(|o| !o.value_db.is_finite() || !o.position.is_finite()) {
        return Err(Error::InvalidArgument("observations must be finite".into()));
    }
    if planarity(obs) < COLLINEAR_RATIO {
        let mut est = weighted_centroid(obs)?;
        est.warning = Some("cell positions are collinear; fell back to weighted centroid".into());
        return Ok(est);
    }
    let best = lsq_starts(obs, tx_power_guess_dbm, model)
        .into_iter()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .expect("at least one start");
    Ok(LocalizationEstimate {
        position: best.solution,
        method: LocalizationMethod::PathlossLSQ,
        residual: (best.cost / obs.len() as f64).sqrt(),
        cells_used: obs.iter().map(|o| o.cell_id.clone()).collect(),
        tx_power_dbm: Some(best.tx_power_dbm),
        warning: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationCheck {
    pub error_m: f64,
    pub radius_m: f64,
    pub within_radius: bool,
}

pub fn validate_localization(estimate: &LocalizationEstimate, truth: Point, radius_m: f64) -> LocalizationCheck {
    let error_m = estimate.position.distance(&truth);
    LocalizationCheck {
        error_m,
        radius_m,
        within_radius: error_m <= radius_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ob(id: &str, x: f64, y: f64, v: f64) -> Observation {
        Observation {
            cell_id: id.into(),
            position: Point::new(x, y),
            value_db: v,
        }
    }

    fn model() -> LsqModel {
        LsqModel {
            environment: Environment::UMa,
            fc_ghz: 3.5,
            h_bs_m: 25.0,
            h_src_m: 1.5,
        }
    }

    fn synth(src: Point, p: f64, cells: &[(f64, f64)]) -> Vec<Observation> {
        let m = model();
        cells
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let pos = Point::new(x, y);
                ob(&format!("C{i}"), x, y, p - m.pathloss(pos.distance(&src)))
            })
            .collect()
    }

    const CELLS: [(f64, f64); 5] = [(0.0, 0.0), (500.0, 0.0), (250.0, 433.0), (-250.0, 433.0), (0.0, 866.0)];

    #[test]
    fn centroid_examples() {
        let one = weighted_centroid(&[ob("A", 3.0, 4.0, 7.0)]).unwrap();
        assert_eq!(one.position, Point::new(3.0, 4.0));
        let two = weighted_centroid(&[ob("A", 0.0, 0.0, 5.0), ob("B", 2.0, 0.0, 5.0)]).unwrap();
        assert!((two.position.x - 1.0).abs() < 1e-12 && two.position.y.abs() < 1e-12);
        assert!((two.residual - 1.0).abs() < 1e-12);
        assert!(weighted_centroid(&[]).is_err());
    }

    #[test]
    fn lsq_recovers_noiseless_source() {
        let src = Point::new(120.0, 260.0);
        let obs = synth(src, 16.0, &CELLS);
        let est = pathloss_lsq(&obs, 0.0, &model()).unwrap();
        assert_eq!(est.method, LocalizationMethod::PathlossLSQ);
        assert!(est.position.distance(&src) < 1.0, "{:?}", est.position);
        assert!((est.tx_power_dbm.unwrap() - 16.0).abs() < 0.1);
    }

    #[test]
    fn lsq_preconditions() {
        let obs = synth(Point::new(0.0, 0.0), 10.0, &CELLS[..2]);
        assert!(pathloss_lsq(&obs, 0.0, &model()).is_err());
        let line = synth(Point::new(50.0, 50.0), 10.0, &[(0.0, 0.0), (100.0, 0.0), (300.0, 0.0)]);
        let est = pathloss_lsq(&line, 0.0, &model()).unwrap();
        assert_eq!(est.method, LocalizationMethod::WeightedCentroid);
        assert!(est.warning.is_some());
        let cosited = synth(Point::new(50.0, 50.0), 10.0, &[(0.0, 0.0); 3]);
        assert!(pathloss_lsq(&cosited, 0.0, &model()).unwrap().warning.is_some());
    }

    #[test]
    fn validation_examples() {
        let est = weighted_centroid(&[ob("A", 0.0, 0.0, 1.0)]).unwrap();
        let ok = validate_localization(&est, Point::new(0.0, 0.0), 200.0);
        assert_eq!(ok.error_m, 0.0);
        assert!(ok.within_radius);
        let off = validate_localization(&est, Point::new(300.0, 0.0), 200.0);
        assert!(!off.within_radius);
    }

    #[test]
    fn tx_power_estimate_matches_truth() {
        let src = Point::new(80.0, 90.0);
        let obs = synth(src, 12.0, &CELLS);
        assert!((estimate_tx_power_dbm(&obs, src, &model()) - 12.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn centroid_inside_hull_and_offset_invariant(
            vals in proptest::collection::vec(-5.0f64..30.0, 3),
            shift in -20.0f64..20.0,
        ) {
            let pts = [(0.0, 0.0), (400.0, 0.0), (100.0, 300.0)];
            let obs: Vec<Observation> = pts.iter().zip(&vals).enumerate().map(|(i, (p, v))| ob(&i.to_string(), p.0, p.1, *v)).collect();
            let est = weighted_centroid(&obs).unwrap();
            // barycentric test for the triangle
            let (x, y) = (est.position.x, est.position.y);
            let l3 = y / 300.0;
            let l2 = (x - 100.0 * l3) / 400.0;
            prop_assert!(l3 >= -1e-9 && l2 >= -1e-9 && l2 + l3 <= 1.0 + 1e-9);
            let moved: Vec<Observation> = obs.iter().map(|o| Observation { value_db: o.value_db + shift, ..o.clone() }).collect();
            let est2 = weighted_centroid(&moved).unwrap();
            prop_assert!(est.position.distance(&est2.position) < 1e-6);
        }

        #[test]
        fn centroid_translation_equivariant(dx in -1e4f64..1e4, dy in -1e4f64..1e4, v in proptest::collection::vec(0.0f64..20.0, 4)) {
            let base: Vec<Observation> = CELLS.iter().take(4).zip(&v).map(|(c, v)| ob("c", c.0, c.1, *v)).collect();
            let moved: Vec<Observation> = base.iter().map(|o| Observation { position: o.position.translate(dx, dy), ..o.clone() }).collect();
            let a = weighted_centroid(&base).unwrap().position.translate(dx, dy);
            let b = weighted_centroid(&moved).unwrap().position;
            prop_assert!(a.distance(&b) < 1e-6);
        }
    }

    #[test]
    fn lsq_translation_equivariant() {
        let src = Point::new(120.0, 260.0);
        let obs = synth(src, 16.0, &CELLS);
        let (dx, dy) = (3000.0, -1500.0);
        let moved: Vec<Observation> = obs
            .iter()
            .map(|o| Observation {
                position: o.position.translate(dx, dy),
                ..o.clone()
            })
            .collect();
        let a = pathloss_lsq(&obs, 0.0, &model()).unwrap().position.translate(dx, dy);
        let b = pathloss_lsq(&moved, 0.0, &model()).unwrap().position;
        assert!(a.distance(&b) < 1e-3, "{a:?} {b:?}");
    }
}
