//! Pullback iteration for formal matings of quadratic polynomials
//! (feature `mating`): square-root lifts through a Möbius-normalized
//! quadratic rational map, with the three-point gauge (0, 1, ∞).
//!
//! Scope: two combinatorial families.
//!
//! * The self-mating of the period-two polynomial (critical-value angle
//!   1/3 on both hemispheres) — the classical obstructed gluing, bundled
//!   as the degenerating fixture.  The marked points are the two
//!   critical orbits `w₂ → w₁ → w₂` and `b₂ → b₁ → b₂` with critical
//!   points `w₂, b₂`; the gauge pins `w₂ = 0`, `b₁ = 1`, `b₂ = ∞`,
//!   leaving the white critical value `w = w₁` as the one modulus.  The
//!   normalized lifting map each step is `R(z) = (z² − w)/(z² − 1)`
//!   (critical points 0 and ∞, critical values `w` and 1, and the gauge
//!   points lift to themselves), so the pullback reduces to
//!   `w ← ±√w` with the branch chosen by continuity.  Every run collapses
//!   `w` onto the black critical value 1: the iteration degenerates
//!   instead of converging, which is exactly what the tracked length
//!   proxies report.
//!
//! * Matings with a trivial (angle-0) factor: the black factor `z²` has
//!   its whole critical orbit at ∞, the gauge freezes the white critical
//!   point at 0 and monic scale, and the normalized pullback is exactly
//!   the polynomial spider step on the white factor —
//!   [`with_trivial_black_factor`] hands back the corresponding
//!   polynomial run.

use num_complex::Complex64;

use crate::spider::{
    classify_points, detect_collision, length_proxy, nearest_square_root, Bipartition,
    Classification, IterationStatus, PullbackIterationState, SpiderConfiguration, SpiderError,
    Thresholds, Verdict,
};

/// Marked finite points of the basilica self-mating in gauge order:
/// index 1 = white critical value `w` (the modulus), index 2 = white
/// critical point (pinned at 0), index 3 = black critical value (pinned
/// at 1); the black critical point sits at ∞.
pub const BASILICA_POINT_COUNT: usize = 3;

/// Sphere positions of the finite marked points for a given modulus.
fn basilica_points(w: Complex64) -> Vec<Complex64> {
    vec![w, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
}

/// A pullback run of the basilica self-mating.
#[derive(Debug, Clone)]
pub struct BasilicaSelfMating {
    history: Vec<Complex64>,
    tracked: Vec<Bipartition>,
    proxies: Vec<Vec<f64>>,
    distances: Vec<f64>,
    status: IterationStatus,
}

impl BasilicaSelfMating {
    /// Starts a run from the white critical value `w`.  The start must
    /// keep the marked points apart.
    pub fn new(
        w: Complex64,
        tracked: Vec<Bipartition>,
        thresholds: &Thresholds,
    ) -> Result<Self, SpiderError> {
        let points = basilica_points(w);
        if let Some((i, j)) = detect_collision(&points, thresholds.collision_tol) {
            return Err(SpiderError::PointCollision { i, j });
        }
        let mut proxies = Vec::with_capacity(tracked.len());
        for class in &tracked {
            proxies.push(vec![length_proxy(&points, class, 0.0)?]);
        }
        Ok(BasilicaSelfMating {
            history: vec![w],
            tracked,
            proxies,
            distances: Vec::new(),
            status: IterationStatus::Running,
        })
    }

    /// All essential two-point classes on the marked sphere.
    pub fn default_tracked() -> Vec<Bipartition> {
        Bipartition::all_pairs(BASILICA_POINT_COUNT)
    }

    /// Random admissible start: modulus in `[0.3, 0.7]`, any argument.
    pub fn admissible_start<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
        let radius = rng.gen_range(0.3..=0.7);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(radius, angle)
    }

    pub fn history(&self) -> &[Complex64] {
        &self.history
    }

    pub fn latest(&self) -> Complex64 {
        *self.history.last().unwrap()
    }

    /// Finite marked points of the latest configuration.
    pub fn latest_points(&self) -> Vec<Complex64> {
        basilica_points(self.latest())
    }

    pub fn tracked(&self) -> &[Bipartition] {
        &self.tracked
    }

    pub fn proxies(&self) -> &[Vec<f64>] {
        &self.proxies
    }

    pub fn status(&self) -> &IterationStatus {
        &self.status
    }

    pub fn steps(&self) -> usize {
        self.history.len() - 1
    }

    /// One pullback step: lift through `R(z) = (z² − w)/(z² − 1)` and
    /// renormalize to the (0, 1, ∞) gauge, which moves the modulus to
    /// the square root of `w` nearer its previous position.
    pub fn step(&mut self, thresholds: &Thresholds) -> Result<&IterationStatus, SpiderError> {
        if !self.status.is_running() {
            return Err(SpiderError::NotRunning);
        }
        let w = self.latest();
        let next = match nearest_square_root(w, w, thresholds.branch_tol, 1) {
            Ok(next) => next,
            Err(SpiderError::BranchAmbiguity { point }) => {
                self.status = IterationStatus::Indeterminate {
                    reason: format!(
                        "square-root branch for point {point} became ambiguous"
                    ),
                };
                return Ok(&self.status);
            }
            Err(e) => return Err(e),
        };
        self.distances.push((next - w).norm());
        let points = basilica_points(next);
        for (class, seq) in self.tracked.iter().zip(&mut self.proxies) {
            seq.push(length_proxy(&points, class, 0.0)?);
        }
        self.history.push(next);
        self.reclassify(thresholds);
        Ok(&self.status)
    }

    /// Steps until terminal or `max_steps` exhausted.
    pub fn run(
        &mut self,
        max_steps: usize,
        thresholds: &Thresholds,
    ) -> Result<&IterationStatus, SpiderError> {
        for _ in 0..max_steps {
            if !self.status.is_running() {
                break;
            }
            self.step(thresholds)?;
        }
        Ok(&self.status)
    }

    pub fn classification(&self, thresholds: &Thresholds) -> Classification {
        classify_points(&self.latest_points(), &self.distances, &self.proxies, thresholds)
    }

    fn reclassify(&mut self, thresholds: &Thresholds) {
        let classification = self.classification(thresholds);
        match classification.verdict {
            Verdict::Converged => {
                self.status = IterationStatus::Converged { c: self.latest() };
            }
            Verdict::Degenerate => {
                self.status = IterationStatus::Degenerate {
                    shrinking: classification
                        .shrinking
                        .iter()
                        .map(|&ci| self.tracked[ci].clone())
                        .collect(),
                    collision: classification.collision,
                };
            }
            Verdict::Indeterminate => {}
        }
    }
}

/// Mating with the trivial black factor (angle 0): the black critical
/// orbit pins ∞, and the Möbius-normalized pullback is the polynomial
/// spider iteration on the white factor.
pub fn with_trivial_black_factor(
    white: SpiderConfiguration,
    tracked: Vec<Bipartition>,
    thresholds: &Thresholds,
) -> Result<PullbackIterationState, SpiderError> {
    PullbackIterationState::new(white, tracked, thresholds)
}
