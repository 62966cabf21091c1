//! Constant-velocity Kalman filter over bounding-box state.
//!
//! State is the 8-vector `[cx, cy, a, h, vcx, vcy, va, vh]`: box center,
//! aspect ratio w/h, height, and their per-frame velocities. Noise standard
//! deviations scale with the box height (position factor 1/20, velocity
//! factor 1/160), the convention shared by the tracker family this crate
//! reproduces. The time step is fixed at one frame.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat8x4 = SMatrix<f64, 8, 4>;

/// Regularization added to the projected covariance before inversion in
/// gating, avoiding singularities on degenerate tracks.
const GATING_REG: f64 = 1e-9;

/// Filter state: mean and covariance of the 8-dimensional box state.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Vec8,
    pub covariance: Mat8,
}

impl KalmanState {
    /// Current center estimate (cx, cy).
    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    /// Current state as a top-left/width/height box. Errors if the height
    /// in the mean is no longer positive.
    pub fn bbox(&self) -> Result<BoundingBox> {
        let (cx, cy) = self.center();
        let a = self.mean[2];
        let h = self.mean[3];
        if h <= 0.0 || a <= 0.0 || !h.is_finite() || !a.is_finite() {
            return Err(Error::DegenerateState(format!(
                "mean aspect {a} / height {h} does not describe a box"
            )));
        }
        let w = a * h;
        BoundingBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }
}

/// Shared filter parameters. One instance drives every track of a sequence.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    std_weight_position: f64,
    std_weight_velocity: f64,
    /// Scales the process noise Q; zero makes predict purely deterministic.
    process_noise_scale: f64,
    /// Scales the measurement noise R; zero makes update trust measurements
    /// exactly.
    measurement_noise_scale: f64,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            process_noise_scale: 1.0,
            measurement_noise_scale: 1.0,
        }
    }
}

impl KalmanFilter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Filter with Q = R = 0, used to check noise-free tracking behavior.
    /// Initial covariance is unaffected.
    pub fn noise_free() -> Self {
        Self {
            process_noise_scale: 0.0,
            measurement_noise_scale: 0.0,
            ..Self::default()
        }
    }

    fn motion_matrix() -> Mat8 {
        let mut f = Mat8::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        f
    }

    fn measurement(bbox: &BoundingBox) -> Vec4 {
        let (cx, cy) = bbox.center();
        Vec4::new(cx, cy, bbox.w / bbox.h, bbox.h)
    }

    /// New track state from a detection box: position from the box,
    /// velocities zero, diagonal covariance with stds proportional to h.
    pub fn initiate(&self, bbox: &BoundingBox) -> Result<KalmanState> {
        bbox.validate()?;
        let z = Self::measurement(bbox);
        let mut mean = Vec8::zeros();
        for i in 0..4 {
            mean[i] = z[i];
        }
        let h = bbox.h;
        let std = [
            2.0 * self.std_weight_position * h,
            2.0 * self.std_weight_position * h,
            1e-2,
            2.0 * self.std_weight_position * h,
            10.0 * self.std_weight_velocity * h,
            10.0 * self.std_weight_velocity * h,
            1e-5,
            10.0 * self.std_weight_velocity * h,
        ];
        let mut cov = Mat8::zeros();
        for i in 0..8 {
            cov[(i, i)] = std[i] * std[i];
        }
        Ok(KalmanState {
            mean,
            covariance: cov,
        })
    }

    fn process_noise(&self, h: f64) -> Mat8 {
        let s = self.process_noise_scale;
        let std = [
            self.std_weight_position * h,
            self.std_weight_position * h,
            1e-2,
            self.std_weight_position * h,
            self.std_weight_velocity * h,
            self.std_weight_velocity * h,
            1e-5,
            self.std_weight_velocity * h,
        ];
        let mut q = Mat8::zeros();
        for i in 0..8 {
            q[(i, i)] = (s * std[i]) * (s * std[i]);
        }
        q
    }

    fn measurement_noise(&self, h: f64) -> Mat4 {
        let s = self.measurement_noise_scale;
        let std = [
            self.std_weight_position * h,
            self.std_weight_position * h,
            1e-1,
            self.std_weight_position * h,
        ];
        let mut r = Mat4::zeros();
        for i in 0..4 {
            r[(i, i)] = (s * std[i]) * (s * std[i]);
        }
        r
    }

    /// Advance one frame: mean through the constant-velocity transition,
    /// covariance as F P F' + Q.
    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let f = Self::motion_matrix();
        let q = self.process_noise(state.mean[3]);
        let mean = f * state.mean;
        let covariance = f * state.covariance * f.transpose() + q;
        KalmanState {
            mean,
            covariance: symmetrize(covariance),
        }
    }

    /// Project the state onto measurement space: (H x, H P H' + R).
    fn project(&self, state: &KalmanState) -> (Vec4, Mat4) {
        let mean = Vec4::new(state.mean[0], state.mean[1], state.mean[2], state.mean[3]);
        let mut cov = state.covariance.fixed_view::<4, 4>(0, 0).into_owned();
        cov += self.measurement_noise(state.mean[3]);
        (mean, cov)
    }

    /// Standard Kalman correction against the box measurement
    /// [cx, cy, a, h]. Covariance is updated in Joseph form, which keeps it
    /// symmetric positive semidefinite.
    pub fn update(&self, state: &KalmanState, bbox: &BoundingBox) -> Result<KalmanState> {
        bbox.validate()?;
        let (projected_mean, projected_cov) = self.project(state);

        let chol = match projected_cov.cholesky() {
            Some(c) => c,
            None => (projected_cov + Mat4::identity() * GATING_REG)
                .cholesky()
                .ok_or_else(|| {
                    Error::DegenerateState("projected covariance not invertible".into())
                })?,
        };
        // K = P H' S^-1, with H = [I 0] so P H' is the left 8x4 block of P.
        let pht: Mat8x4 = state.covariance.fixed_view::<8, 4>(0, 0).into_owned();
        let gain = chol.solve(&pht.transpose()).transpose();

        let innovation = Self::measurement(bbox) - projected_mean;
        let mean = state.mean + gain * innovation;

        // Joseph form: (I - K H) P (I - K H)' + K R K'
        let mut ikh = Mat8::identity();
        for i in 0..8 {
            for j in 0..4 {
                ikh[(i, j)] -= gain[(i, j)];
            }
        }
        let r = self.measurement_noise(state.mean[3]);
        let covariance = ikh * state.covariance * ikh.transpose() + gain * r * gain.transpose();

        Ok(KalmanState {
            mean,
            covariance: symmetrize(covariance),
        })
    }

    /// Squared Mahalanobis distance of each box measurement under the
    /// projected 4-D measurement distribution.
    pub fn gating_distance(&self, state: &KalmanState, boxes: &[BoundingBox]) -> Result<Vec<f64>> {
        let (mean, mut cov) = self.project(state);
        cov += Mat4::identity() * GATING_REG;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::DegenerateState("projected covariance not invertible".into()))?;
        let mut out = Vec::with_capacity(boxes.len());
        for b in boxes {
            b.validate()?;
            let d = Self::measurement(b) - mean;
            let solved = chol.solve(&d);
            out.push(d.dot(&solved));
        }
        Ok(out)
    }
}

fn symmetrize(m: Mat8) -> Mat8 {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn initiate_center_aspect_and_zero_velocity() {
        let kf = KalmanFilter::new();
        let s = kf.initiate(&bx(0.0, 0.0, 10.0, 20.0)).unwrap();
        let want = [5.0, 10.0, 0.5, 20.0, 0.0, 0.0, 0.0, 0.0];
        for i in 0..8 {
            assert_eq!(s.mean[i], want[i]);
        }
        for i in 0..8 {
            assert!(s.covariance[(i, i)] > 0.0);
        }
    }

    #[test]
    fn initiate_bbox_round_trip_is_exact() {
        let kf = KalmanFilter::new();
        for &(x, y, w, h) in &[
            (0.0, 0.0, 10.0, 20.0),
            (-3.5, 7.25, 42.0, 13.5),
            (100.0, 200.0, 1.0, 1.0),
        ] {
            let b = bx(x, y, w, h);
            let s = kf.initiate(&b).unwrap();
            let back = s.bbox().unwrap();
            assert_eq!(back.x, b.x);
            assert_eq!(back.y, b.y);
            assert_eq!(back.w, b.w);
            assert_eq!(back.h, b.h);
        }
    }

    #[test]
    fn predict_advances_position_linearly() {
        let kf = KalmanFilter::new();
        let mut s = kf.initiate(&bx(-0.5, -5.0, 1.0, 10.0)).unwrap();
        // mean [0, 0, 0.1, 10, ...]; set velocity by hand
        s.mean[2] = 1.0;
        s.mean[4] = 2.0;
        let p = kf.predict(&s);
        assert_eq!(p.mean[0], 2.0);
        assert_eq!(p.mean[1], 0.0);
        assert_eq!(p.mean[2], 1.0);
        assert_eq!(p.mean[3], 10.0);
    }

    #[test]
    fn predict_mean_equals_f_times_mean() {
        // independent matrix-multiply oracle over random states
        let kf = KalmanFilter::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut s = kf
                .initiate(&bx(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(1.0..40.0),
                    rng.random_range(1.0..40.0),
                ))
                .unwrap();
            for i in 4..8 {
                s.mean[i] = rng.random_range(-5.0..5.0);
            }
            let p = kf.predict(&s);
            // F mean with one frame of constant-velocity motion
            let mut want = [0.0; 8];
            for i in 0..4 {
                want[i] = s.mean[i] + s.mean[i + 4];
                want[i + 4] = s.mean[i + 4];
            }
            for i in 0..8 {
                assert_eq!(p.mean[i], want[i]);
            }
        }
    }

    #[test]
    fn predict_increases_trace_when_q_positive() {
        let kf = KalmanFilter::new();
        let s = kf.initiate(&bx(0.0, 0.0, 10.0, 20.0)).unwrap();
        let p = kf.predict(&s);
        assert!(p.covariance.trace() > s.covariance.trace());
    }

    #[test]
    fn repeated_predict_keeps_zero_velocity_position() {
        let kf = KalmanFilter::new();
        let mut s = kf.initiate(&bx(3.0, 4.0, 10.0, 20.0)).unwrap();
        for _ in 0..25 {
            s = kf.predict(&s);
        }
        assert_eq!(s.mean[0], 8.0);
        assert_eq!(s.mean[1], 14.0);
    }

    #[test]
    fn update_with_predicted_mean_changes_nothing() {
        let kf = KalmanFilter::new();
        let s = kf.initiate(&bx(0.0, 0.0, 10.0, 20.0)).unwrap();
        let p = kf.predict(&s);
        let measured = p.bbox().unwrap();
        let u = kf.update(&p, &measured).unwrap();
        for i in 0..8 {
            assert!((u.mean[i] - p.mean[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn update_contracts_position_variance() {
        let kf = KalmanFilter::new();
        let s = kf.initiate(&bx(0.0, 0.0, 10.0, 20.0)).unwrap();
        let p = kf.predict(&s);
        let u = kf.update(&p, &bx(1.0, 1.0, 10.0, 20.0)).unwrap();
        assert!(u.covariance[(0, 0)] <= p.covariance[(0, 0)]);
        assert!(u.covariance[(1, 1)] <= p.covariance[(1, 1)]);
    }

    #[test]
    fn repeated_update_converges_to_fixed_box() {
        let kf = KalmanFilter::new();
        let target = bx(40.0, 30.0, 16.0, 32.0);
        let mut s = kf.initiate(&bx(36.0, 28.0, 16.0, 32.0)).unwrap();
        for _ in 0..50 {
            s = kf.predict(&s);
            s = kf.update(&s, &target).unwrap();
        }
        let (cx, cy) = s.center();
        let (tx, ty) = target.center();
        assert!((cx - tx).abs() < 1e-3, "cx {cx} vs {tx}");
        assert!((cy - ty).abs() < 1e-3, "cy {cy} vs {ty}");
    }

    #[test]
    fn gating_distance_zero_at_predicted_mean() {
        let kf = KalmanFilter::new();
        let s = kf.initiate(&bx(0.0, 0.0, 10.0, 20.0)).unwrap();
        let p = kf.predict(&s);
        let d = kf.gating_distance(&p, &[p.bbox().unwrap()]).unwrap();
        assert!(d[0].abs() < 1e-9);
    }

    #[test]
    fn gating_distance_matches_explicit_inverse() {
        // dense-algebra oracle: (z - mu)' S^-1 (z - mu) with S inverted directly
        let kf = KalmanFilter::new();
        let s = kf.initiate(&bx(5.0, 6.0, 12.0, 24.0)).unwrap();
        let p = kf.predict(&s);
        let boxes = [
            bx(4.0, 6.5, 12.0, 24.0),
            bx(9.0, 1.0, 10.0, 26.0),
            bx(50.0, 60.0, 12.0, 24.0),
        ];
        let got = kf.gating_distance(&p, &boxes).unwrap();

        let (mean, cov) = kf.project(&p);
        let s_inv = (cov + Mat4::identity() * GATING_REG).try_inverse().unwrap();
        for (i, b) in boxes.iter().enumerate() {
            let z = KalmanFilter::measurement(b);
            let d = z - mean;
            let want = (d.transpose() * s_inv * d)[(0, 0)];
            assert!((got[i] - want).abs() < 1e-9 * want.max(1.0));
            assert!(got[i] >= 0.0);
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd_over_random_cycles() {
        let kf = KalmanFilter::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut s = kf.initiate(&bx(0.0, 0.0, 20.0, 40.0)).unwrap();
        for _ in 0..1000 {
            s = kf.predict(&s);
            if rng.random_range(0.0..1.0) < 0.8 {
                let (cx, cy) = s.center();
                let b = BoundingBox::from_center(
                    cx + rng.random_range(-4.0..4.0),
                    cy + rng.random_range(-4.0..4.0),
                    (s.mean[2] * s.mean[3] + rng.random_range(-2.0..2.0)).max(1.0),
                    (s.mean[3] + rng.random_range(-2.0..2.0)).max(1.0),
                )
                .unwrap();
                s = kf.update(&s, &b).unwrap();
            }
            let asym = (s.covariance - s.covariance.transpose()).abs().max();
            assert!(asym < 1e-9, "asymmetry {asym}");
            let eig = s.covariance.symmetric_eigenvalues();
            let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min_eig > -1e-9, "min eigenvalue {min_eig}");
        }
    }

    #[test]
    fn noise_free_constant_velocity_is_exact_after_two_updates() {
        let kf = KalmanFilter::noise_free();
        let (w, h) = (10.0, 20.0);
        let (vx, vy) = (3.0, -2.0);
        let truth = |t: f64| BoundingBox::from_center(50.0 + vx * t, 80.0 + vy * t, w, h).unwrap();

        let mut s = kf.initiate(&truth(0.0)).unwrap();
        for t in 1..=2 {
            s = kf.predict(&s);
            s = kf.update(&s, &truth(t as f64)).unwrap();
        }
        // velocity is identified; pure prediction must now follow the truth
        let mut p = s;
        for t in 3..=10 {
            p = kf.predict(&p);
            let (cx, cy) = p.center();
            let (tx, ty) = truth(t as f64).center();
            assert!((cx - tx).abs() < 1e-6, "t={t} cx {cx} vs {tx}");
            assert!((cy - ty).abs() < 1e-6, "t={t} cy {cy} vs {ty}");
        }
    }

    #[test]
    fn bbox_errors_on_degenerate_mean() {
        let kf = KalmanFilter::new();
        let mut s = kf.initiate(&bx(0.0, 0.0, 10.0, 20.0)).unwrap();
        s.mean[3] = -1.0;
        assert!(s.bbox().is_err());
    }
}
