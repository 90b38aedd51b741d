//! Collar geometry, the quadratic spider (pullback) iteration on point
//! configurations, per-curve length proxies, and classification of a run
//! as convergent or degenerating.
//!
//! A configuration is a tuple of complex positions for the forward orbit
//! of a quadratic polynomial's critical value, in the gauge "critical
//! point at 0, monic dynamics" (the affine freedom is a translation,
//! removed by [`SpiderConfiguration::normalized`]; the scale is pinned by
//! monicity).  One pullback step lifts every point through `z ↦ z² + c`
//! with `c` the current first point, choosing each square root by
//! continuity against the point's previous position.  For realizable
//! combinatorics the configurations converge to the orbit of the true
//! parameter; for obstructed ones some cluster of points collapses, which
//! the tracked curve-class length proxies and the collision detector
//! report as degeneration.

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpiderError {
    #[error("geodesic length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("external angle denominator must be nonzero")]
    BadAngle,
    #[error("bipartition is not an essential curve class: {0}")]
    BadBipartition(String),
    #[error("expected one point per orbit angle ({expected}), got {found}")]
    WrongPointCount { expected: usize, found: usize },
    #[error("marked points {i} and {j} collide (relative distance below tolerance)")]
    PointCollision { i: usize, j: usize },
    #[error(
        "branch choice for point {point} is ambiguous: both square-root lifts \
         are equidistant from its previous position"
    )]
    BranchAmbiguity { point: usize },
    #[error("iteration has already terminated")]
    NotRunning,
}

// ---------------------------------------------------------------------
// Collar geometry.
// ---------------------------------------------------------------------

/// Full width of the standard embedded collar around a simple closed
/// geodesic of length `x` (twice the half-width on each side):
/// `s(x) = 2·asinh(1/sinh(x/2))`.  Strictly decreasing from ∞ to 0; its
/// unique fixed point is `2·asinh(1)`, where the collar is exactly as
/// wide as the geodesic is long.
pub fn collar_width(x: f64) -> Result<f64, SpiderError> {
    if !(x > 0.0) {
        return Err(SpiderError::NonPositiveLength(x));
    }
    Ok(2.0 * (1.0 / (x / 2.0).sinh()).asinh())
}

/// The unique solution of `collar_width(x) = x`, namely `2·asinh(1)`.
pub fn collar_fixed_point() -> f64 {
    2.0 * 1.0f64.asinh()
}

// ---------------------------------------------------------------------
// External angles and their doubling orbits.
// ---------------------------------------------------------------------

/// A rational external angle in `[0, 1)`, reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExternalAngle(Ratio<u64>);

impl ExternalAngle {
    pub fn new(numer: u64, denom: u64) -> Result<Self, SpiderError> {
        if denom == 0 {
            return Err(SpiderError::BadAngle);
        }
        Ok(ExternalAngle(Ratio::new(numer % denom, denom)))
    }

    /// Parses `"p/q"` or a bare integer (taken mod 1).
    pub fn parse(s: &str) -> Result<Self, SpiderError> {
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => {
                (p.trim().parse().map_err(|_| SpiderError::BadAngle)?,
                 q.trim().parse().map_err(|_| SpiderError::BadAngle)?)
            }
            None => (s.trim().parse().map_err(|_| SpiderError::BadAngle)?, 1),
        };
        ExternalAngle::new(p, q)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    fn doubled(self) -> Self {
        ExternalAngle((self.0 * Ratio::from_integer(2)).fract())
    }

    /// Forward orbit under angle doubling, starting at the angle itself
    /// (the critical-value angle).
    pub fn orbit(self) -> AngleOrbit {
        let mut angles = vec![self];
        let mut index: BTreeMap<ExternalAngle, usize> = BTreeMap::new();
        index.insert(self, 0);
        let repeat_index = loop {
            let next = angles.last().unwrap().doubled();
            if let Some(&r) = index.get(&next) {
                break r;
            }
            index.insert(next, angles.len());
            angles.push(next);
        };
        let m = angles.len();
        let successor = (0..m).map(|k| if k + 1 < m { k + 1 } else { repeat_index }).collect();
        AngleOrbit { angles, successor, repeat_index }
    }
}

impl fmt::Display for ExternalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

/// The doubling orbit of an external angle: `angles[k]` is the angle of
/// the ray landing at the `(k+1)`-st critical-value iterate, and
/// `successor[k]` is the orbit index of its double.
#[derive(Debug, Clone)]
pub struct AngleOrbit {
    pub angles: Vec<ExternalAngle>,
    pub successor: Vec<usize>,
    /// Index the orbit re-enters when doubled past the end: the orbit is
    /// preperiodic with preperiod `repeat_index` and period
    /// `len − repeat_index`.
    pub repeat_index: usize,
}

impl AngleOrbit {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn preperiod(&self) -> usize {
        self.repeat_index
    }

    pub fn period(&self) -> usize {
        self.angles.len() - self.repeat_index
    }
}

/// Residual of the critical-orbit relation the angle imposes on the
/// quadratic parameter: `|f^{m+1}(0) − f^{r+1}(0)|` for `f = z² + c`,
/// where `m` is the orbit length and `r` its re-entry index.  Zero
/// exactly at the parameter realizing the angle.
pub fn orbit_relation_residual(angle: ExternalAngle, c: Complex64) -> f64 {
    let orbit = angle.orbit();
    let m = orbit.len();
    let r = orbit.repeat_index;
    let mut v = Complex64::new(0.0, 0.0);
    let mut iterates = Vec::with_capacity(m + 2);
    iterates.push(v);
    for _ in 0..=m {
        v = v * v + c;
        iterates.push(v);
    }
    (iterates[m + 1] - iterates[r + 1]).norm()
}

// ---------------------------------------------------------------------
// Curve classes as puncture bipartitions.
// ---------------------------------------------------------------------

/// A curve class on the configuration sphere presented as a bipartition
/// of the marked points: `inner` lists the 1-based indices of the finite
/// points enclosed by the curve; every other finite point and ∞ lie
/// outside.  Essential means at least two marked points on each side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bipartition {
    inner: Vec<usize>,
}

impl Bipartition {
    pub fn new(
        inner: impl IntoIterator<Item = usize>,
        n_points: usize,
    ) -> Result<Self, SpiderError> {
        let mut v: Vec<usize> = inner.into_iter().collect();
        v.sort_unstable();
        let before = v.len();
        v.dedup();
        if v.len() != before {
            return Err(SpiderError::BadBipartition("repeated point index".into()));
        }
        if v.iter().any(|&i| i == 0 || i > n_points) {
            return Err(SpiderError::BadBipartition(format!(
                "point indices must lie in 1..={n_points}"
            )));
        }
        if v.len() < 2 {
            return Err(SpiderError::BadBipartition(
                "fewer than two points inside the curve".into(),
            ));
        }
        if n_points - v.len() < 1 {
            return Err(SpiderError::BadBipartition(
                "fewer than two marked points (finite or ∞) outside the curve".into(),
            ));
        }
        Ok(Bipartition { inner: v })
    }

    pub fn inner(&self) -> &[usize] {
        &self.inner
    }

    pub fn contains(&self, index: usize) -> bool {
        self.inner.binary_search(&index).is_ok()
    }

    /// All two-point inner classes on `n_points ≥ 3` finite points.
    pub fn all_pairs(n_points: usize) -> Vec<Bipartition> {
        let mut out = Vec::new();
        if n_points < 3 {
            return out;
        }
        for i in 1..=n_points {
            for j in (i + 1)..=n_points {
                out.push(Bipartition::new([i, j], n_points).unwrap());
            }
        }
        out
    }

    pub fn label(&self) -> String {
        self.inner.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

// ---------------------------------------------------------------------
// Length proxy.
// ---------------------------------------------------------------------

/// Length proxy of a curve class on a finite point configuration
/// (∞ implicitly marked, outside every class): `π / modulus` of the round
/// annulus centered at the inner cluster's centroid, with inner radius
/// reaching the cluster and outer radius touching the nearest outside
/// point.  A proxy, not a hyperbolic length: scale- and
/// rotation-invariant, and it tends to 0 exactly when the inner cluster
/// collapses relative to its surroundings.  Returns ∞ when no round
/// annulus separates the sides.
pub fn length_proxy(
    points: &[Complex64],
    class: &Bipartition,
    collision_tol: f64,
) -> Result<f64, SpiderError> {
    if class.inner().last().copied().unwrap_or(0) > points.len() {
        return Err(SpiderError::BadBipartition(format!(
            "class {class} exceeds the {} marked points",
            points.len()
        )));
    }
    if let Some((i, j)) = detect_collision(points, collision_tol) {
        return Err(SpiderError::PointCollision { i, j });
    }
    let inner: Vec<Complex64> = class.inner().iter().map(|&i| points[i - 1]).collect();
    let center = inner.iter().sum::<Complex64>() / inner.len() as f64;
    let r = inner.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let outer_min = points
        .iter()
        .enumerate()
        .filter(|(i, _)| !class.contains(i + 1))
        .map(|(_, p)| (p - center).norm())
        .fold(f64::INFINITY, f64::min);
    if outer_min <= r {
        return Ok(f64::INFINITY);
    }
    let modulus = (outer_min / r).ln() / (2.0 * PI);
    Ok(PI / modulus)
}

/// Colliding pair (1-based) with relative separation below `tol`, if
/// any; the reported pair attains the minimum separation.
pub fn detect_collision(points: &[Complex64], tol: f64) -> Option<(usize, usize)> {
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut best: Option<(f64, (usize, usize))> = None;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = (points[i] - points[j]).norm();
            if best.map_or(true, |(b, _)| d < b) {
                best = Some((d, (i + 1, j + 1)));
            }
        }
    }
    match best {
        Some((d, pair)) if d <= tol * scale => Some(pair),
        _ => None,
    }
}

// ---------------------------------------------------------------------
// Spider configurations.
// ---------------------------------------------------------------------

/// A point configuration for the orbit of an external angle, in the
/// gauge "critical point at `critical_point`, monic dynamics".  The
/// configuration's own points double as the branch reference for the
/// next pullback step: each new point is the square root nearer to the
/// point's previous position.
#[derive(Debug, Clone)]
pub struct SpiderConfiguration {
    angle: ExternalAngle,
    successor: Vec<usize>,
    points: Vec<Complex64>,
    critical_point: Complex64,
}

impl SpiderConfiguration {
    pub fn new(angle: ExternalAngle, points: Vec<Complex64>) -> Result<Self, SpiderError> {
        let orbit = angle.orbit();
        if points.len() != orbit.len() {
            return Err(SpiderError::WrongPointCount {
                expected: orbit.len(),
                found: points.len(),
            });
        }
        Ok(SpiderConfiguration {
            angle,
            successor: orbit.successor,
            points,
            critical_point: Complex64::new(0.0, 0.0),
        })
    }

    /// The same configuration presented in a translated coordinate where
    /// the critical point sits at `p`.
    pub fn with_critical_point(mut self, p: Complex64) -> Self {
        for z in &mut self.points {
            *z += p - self.critical_point;
        }
        self.critical_point = p;
        self
    }

    /// Start with every orbit point on its external ray at radius 1.
    pub fn standard_start(angle: ExternalAngle) -> Self {
        let orbit = angle.orbit();
        let points = orbit
            .angles
            .iter()
            .map(|a| Complex64::from_polar(1.0, 2.0 * PI * a.to_f64()))
            .collect();
        SpiderConfiguration::new(angle, points).unwrap()
    }

    /// Admissible random start: each orbit point on its external ray,
    /// with an independent uniform radius in `[1/2, 2]`.
    pub fn admissible_start<R: Rng + ?Sized>(angle: ExternalAngle, rng: &mut R) -> Self {
        let orbit = angle.orbit();
        let points = orbit
            .angles
            .iter()
            .map(|a| Complex64::from_polar(rng.gen_range(0.5..=2.0), 2.0 * PI * a.to_f64()))
            .collect();
        SpiderConfiguration::new(angle, points).unwrap()
    }

    pub fn angle(&self) -> ExternalAngle {
        self.angle
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn critical_point(&self) -> Complex64 {
        self.critical_point
    }

    /// Translates the critical point to 0 (the gauge representative).
    pub fn normalized(&self) -> Self {
        self.clone().with_critical_point(Complex64::new(0.0, 0.0))
    }

    /// Current estimate of the quadratic parameter: the critical value,
    /// i.e. the first point in the gauge coordinate.
    pub fn c_estimate(&self) -> Complex64 {
        self.points[0] - self.critical_point
    }

    /// Sup distance between gauge representatives.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.normalized();
        let b = other.normalized();
        a.points
            .iter()
            .zip(&b.points)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    }

    /// Colliding pair (1-based) under relative tolerance `tol`, if any.
    pub fn collision(&self, tol: f64) -> Option<(usize, usize)> {
        detect_collision(&self.normalized().points, tol)
    }

    /// One pullback step: with `c` the current critical value, every
    /// point becomes the square root of `successor point − c` nearer to
    /// its own previous position.  Errors with [`SpiderError::BranchAmbiguity`]
    /// when the two roots are equidistant from the reference within
    /// `branch_tol` (relative).
    pub fn step(&self, branch_tol: f64) -> Result<SpiderConfiguration, SpiderError> {
        let cfg = self.normalized();
        let c = cfg.points[0];
        let mut next = Vec::with_capacity(cfg.points.len());
        for k in 0..cfg.points.len() {
            let root = (cfg.points[cfg.successor[k]] - c).sqrt();
            next.push(choose_branch(root, cfg.points[k], branch_tol, k + 1)?);
        }
        Ok(SpiderConfiguration {
            angle: cfg.angle,
            successor: cfg.successor,
            points: next,
            critical_point: Complex64::new(0.0, 0.0),
        })
    }
}

/// The square root of `value` nearer to `reference`, with the ambiguity
/// policy of [`SpiderConfiguration::step`]; `point` labels the error.
pub fn nearest_square_root(
    value: Complex64,
    reference: Complex64,
    branch_tol: f64,
    point: usize,
) -> Result<Complex64, SpiderError> {
    choose_branch(value.sqrt(), reference, branch_tol, point)
}

/// Picks `root` or `−root`, whichever is nearer to `reference`.
fn choose_branch(
    root: Complex64,
    reference: Complex64,
    branch_tol: f64,
    point: usize,
) -> Result<Complex64, SpiderError> {
    if root.norm() == 0.0 {
        return Ok(root);
    }
    let d_plus = (root - reference).norm();
    let d_minus = (-root - reference).norm();
    if (d_plus - d_minus).abs() <= branch_tol * root.norm() {
        return Err(SpiderError::BranchAmbiguity { point });
    }
    Ok(if d_plus < d_minus { root } else { -root })
}

// ---------------------------------------------------------------------
// Iteration state and classification.
// ---------------------------------------------------------------------

/// Tolerances and windows for stepping and classifying a pullback run.
#[derive(Debug, Clone)]
pub struct Thresholds {
    /// Successive-configuration distance below which the run is Cauchy.
    pub converge_tol: f64,
    /// A tracked proxy below this value (and monotonically decreasing
    /// over the window) marks its class as shrinking.
    pub degenerate_threshold: f64,
    /// Number of consecutive decreases required to call a proxy shrinking.
    pub window: usize,
    /// Relative point-collision tolerance: closer pairs end the run.
    pub collision_tol: f64,
    /// Nondegeneracy margin for the limit: a Cauchy run whose closest
    /// pair is within this relative distance is degenerating, not
    /// converging.
    pub collision_margin: f64,
    /// Relative tolerance for square-root branch ambiguity.
    pub branch_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            converge_tol: 1e-10,
            degenerate_threshold: 1e-3,
            window: 20,
            collision_tol: 1e-13,
            collision_margin: 1e-6,
            branch_tol: 1e-9,
        }
    }
}

/// Verdict of a classification pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Degenerate,
    Indeterminate,
}

/// Classification of a run: the verdict, which tracked classes are
/// shrinking (indices into the tracked list), the colliding pair if one
/// triggered, and the empirical floor — the smallest value any
/// non-shrinking tracked proxy ever took (their observed lower bound).
#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    pub shrinking: Vec<usize>,
    pub collision: Option<(usize, usize)>,
    pub empirical_floor: Option<f64>,
}

/// Tracked classes whose proxy strictly decreased over the last
/// `window` steps; with `threshold = Some(t)` the last value must also
/// lie below `t`.
fn monotone_shrinking(
    proxies: &[Vec<f64>],
    window: usize,
    threshold: Option<f64>,
) -> Vec<usize> {
    let mut out = Vec::new();
    for (ci, seq) in proxies.iter().enumerate() {
        if seq.len() < window + 1 {
            continue;
        }
        let tail = &seq[seq.len() - (window + 1)..];
        if tail.windows(2).all(|w| w[1] < w[0])
            && threshold.map_or(true, |t| *tail.last().unwrap() < t)
        {
            out.push(ci);
        }
    }
    out
}

fn empirical_floor(proxies: &[Vec<f64>], shrinking: &[usize]) -> Option<f64> {
    proxies
        .iter()
        .enumerate()
        .filter(|(ci, seq)| !shrinking.contains(ci) && !seq.is_empty())
        .map(|(_, seq)| seq.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

/// Classifies bare sequences: `distances[i]` is the configuration
/// distance between iterations `i` and `i+1`, `proxies[class][i]` the
/// proxy at iteration `i`.  Degeneration (a shrinking class below the
/// threshold) takes precedence over the Cauchy test.
pub fn classify_sequences(
    distances: &[f64],
    proxies: &[Vec<f64>],
    thresholds: &Thresholds,
) -> Classification {
    let shrinking =
        monotone_shrinking(proxies, thresholds.window, Some(thresholds.degenerate_threshold));
    if !shrinking.is_empty() {
        let floor = empirical_floor(proxies, &shrinking);
        return Classification {
            verdict: Verdict::Degenerate,
            shrinking,
            collision: None,
            empirical_floor: floor,
        };
    }
    if distances.last().is_some_and(|&d| d < thresholds.converge_tol) {
        return Classification {
            verdict: Verdict::Converged,
            shrinking: Vec::new(),
            collision: None,
            empirical_floor: empirical_floor(proxies, &[]),
        };
    }
    Classification {
        verdict: Verdict::Indeterminate,
        shrinking: Vec::new(),
        collision: None,
        empirical_floor: empirical_floor(proxies, &[]),
    }
}

/// Classification with the geometry of the latest configuration taken
/// into account: a collision ends the run as Degenerate outright, and a
/// Cauchy run only counts as Converged when its limit is nondegenerate
/// (no pair within the collision margin) — a collapsing configuration is
/// Cauchy too, but toward a degenerate limit.  In both degenerate paths
/// the shrinking set lists the tracked classes whose proxies decreased
/// monotonically over the window, regardless of the absolute threshold
/// (the proxy is logarithmic in the cluster size, so it reaches the
/// collision tolerances long before any fixed threshold).
pub fn classify_points(
    latest: &[Complex64],
    distances: &[f64],
    proxies: &[Vec<f64>],
    thresholds: &Thresholds,
) -> Classification {
    let monotone = monotone_shrinking(proxies, thresholds.window, None);
    if let Some(pair) = detect_collision(latest, thresholds.collision_tol) {
        let floor = empirical_floor(proxies, &monotone);
        return Classification {
            verdict: Verdict::Degenerate,
            shrinking: monotone,
            collision: Some(pair),
            empirical_floor: floor,
        };
    }
    if distances.last().is_some_and(|&d| d < thresholds.converge_tol) {
        if let Some(pair) = detect_collision(latest, thresholds.collision_margin) {
            let floor = empirical_floor(proxies, &monotone);
            return Classification {
                verdict: Verdict::Degenerate,
                shrinking: monotone,
                collision: Some(pair),
                empirical_floor: floor,
            };
        }
    }
    classify_sequences(distances, proxies, thresholds)
}

/// Terminal state of a pullback run.
#[derive(Debug, Clone)]
pub enum IterationStatus {
    Running,
    Converged {
        c: Complex64,
    },
    Degenerate {
        shrinking: Vec<Bipartition>,
        collision: Option<(usize, usize)>,
    },
    Indeterminate {
        reason: String,
    },
}

impl IterationStatus {
    pub fn is_running(&self) -> bool {
        matches!(self, IterationStatus::Running)
    }
}

/// A pullback run: the configuration history, tracked curve classes with
/// their proxy sequences, and the current status.
#[derive(Debug, Clone)]
pub struct PullbackIterationState {
    history: Vec<SpiderConfiguration>,
    tracked: Vec<Bipartition>,
    proxies: Vec<Vec<f64>>,
    distances: Vec<f64>,
    status: IterationStatus,
}

impl PullbackIterationState {
    /// Starts a run.  The initial configuration must be collision-free;
    /// tracked classes are checked against the orbit size.
    pub fn new(
        start: SpiderConfiguration,
        tracked: Vec<Bipartition>,
        thresholds: &Thresholds,
    ) -> Result<Self, SpiderError> {
        let start = start.normalized();
        if let Some((i, j)) = start.collision(thresholds.collision_tol) {
            return Err(SpiderError::PointCollision { i, j });
        }
        let mut proxies = Vec::with_capacity(tracked.len());
        for class in &tracked {
            proxies.push(vec![length_proxy(start.points(), class, 0.0)?]);
        }
        Ok(PullbackIterationState {
            history: vec![start],
            tracked,
            proxies,
            distances: Vec::new(),
            status: IterationStatus::Running,
        })
    }

    pub fn history(&self) -> &[SpiderConfiguration] {
        &self.history
    }

    pub fn latest(&self) -> &SpiderConfiguration {
        self.history.last().unwrap()
    }

    pub fn tracked(&self) -> &[Bipartition] {
        &self.tracked
    }

    /// `proxies()[class][iteration]`.
    pub fn proxies(&self) -> &[Vec<f64>] {
        &self.proxies
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn status(&self) -> &IterationStatus {
        &self.status
    }

    pub fn steps(&self) -> usize {
        self.history.len() - 1
    }

    /// One pullback step plus reclassification.  Branch ambiguity halts
    /// the run as Indeterminate rather than erroring.
    pub fn step(&mut self, thresholds: &Thresholds) -> Result<&IterationStatus, SpiderError> {
        if !self.status.is_running() {
            return Err(SpiderError::NotRunning);
        }
        let next = match self.latest().step(thresholds.branch_tol) {
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
        self.distances.push(self.latest().distance(&next));
        for (class, seq) in self.tracked.iter().zip(&mut self.proxies) {
            seq.push(length_proxy(next.points(), class, 0.0)?);
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

    /// Classification of the run as it stands.
    pub fn classification(&self, thresholds: &Thresholds) -> Classification {
        classify_points(
            self.latest().points(),
            &self.distances,
            &self.proxies,
            thresholds,
        )
    }

    fn reclassify(&mut self, thresholds: &Thresholds) {
        let classification = self.classification(thresholds);
        match classification.verdict {
            Verdict::Converged => {
                self.status = IterationStatus::Converged { c: self.latest().c_estimate() };
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sixth() -> ExternalAngle {
        ExternalAngle::new(1, 6).unwrap()
    }

    #[test]
    fn collar_width_has_the_advertised_fixed_point_and_shape() {
        let x = collar_fixed_point();
        assert!((collar_width(x).unwrap() - x).abs() < 1e-12);
        // s ∘ s shares the fixed point.
        assert!((collar_width(collar_width(x).unwrap()).unwrap() - x).abs() < 1e-12);
        // Strictly decreasing on a coarse grid; acceptance sweeps 10⁴ points.
        let mut prev = f64::INFINITY;
        for k in 1..=1000 {
            let v = collar_width(k as f64 * 0.01).unwrap();
            assert!(v < prev);
            prev = v;
        }
        // Blows up near 0 like the inverse hyperbolic sine of 2/x.
        assert!(collar_width(1e-6).unwrap() > 14.0);
        assert!(collar_width(0.0).is_err());
        assert!(collar_width(-1.0).is_err());
    }

    #[test]
    fn angle_orbits_have_the_expected_combinatorics() {
        let orbit = sixth().orbit();
        assert_eq!(
            orbit.angles,
            vec![
                ExternalAngle::new(1, 6).unwrap(),
                ExternalAngle::new(1, 3).unwrap(),
                ExternalAngle::new(2, 3).unwrap(),
            ]
        );
        assert_eq!(orbit.successor, vec![1, 2, 1]);
        assert_eq!(orbit.preperiod(), 1);
        assert_eq!(orbit.period(), 2);

        let basilica = ExternalAngle::new(1, 3).unwrap().orbit();
        assert_eq!(basilica.len(), 2);
        assert_eq!(basilica.successor, vec![1, 0]);
        assert_eq!(basilica.period(), 2);

        let trivial = ExternalAngle::new(0, 7).unwrap().orbit();
        assert_eq!(trivial.len(), 1);
        assert_eq!(trivial.successor, vec![0]);

        assert_eq!(ExternalAngle::new(7, 6).unwrap(), sixth());
        assert!(ExternalAngle::new(1, 0).is_err());
        assert_eq!(ExternalAngle::parse("1/6").unwrap(), sixth());
    }

    #[test]
    fn orbit_relation_residual_vanishes_at_the_true_parameter() {
        // Angle 1/6 realizes c = i; angle 1/3 realizes c = −1.
        assert!(orbit_relation_residual(sixth(), c(0.0, 1.0)) < 1e-15);
        assert!(
            orbit_relation_residual(ExternalAngle::new(1, 3).unwrap(), c(-1.0, 0.0)) < 1e-15
        );
        assert!(orbit_relation_residual(sixth(), c(0.1, 0.9)) > 1e-3);
    }

    #[test]
    fn length_proxy_matches_the_annulus_asymptotics_and_invariances() {
        // Inner cluster {0, ε} against {1, ∞}: proxy ~ 2π² / ln(1/ε).
        for &eps in &[1e-3, 1e-6, 1e-9] {
            let points = vec![c(0.0, 0.0), c(eps, 0.0), c(1.0, 0.0)];
            let class = Bipartition::new([1, 2], 3).unwrap();
            let proxy = length_proxy(&points, &class, 0.0).unwrap();
            let predicted = 2.0 * PI * PI / (1.0 / eps).ln();
            assert!(proxy / predicted > 0.5 && proxy / predicted < 2.0, "ε={eps}: {proxy}");
        }
        // Scale and rotation invariance.
        let points = vec![c(0.1, 0.2), c(-0.05, 0.15), c(1.3, -0.4), c(-0.9, -1.1)];
        let class = Bipartition::new([1, 2], 4).unwrap();
        let base = length_proxy(&points, &class, 0.0).unwrap();
        for &factor in &[c(3.5, 0.0), c(0.0, 1.0), c(-0.3, 1.9)] {
            let moved: Vec<Complex64> = points.iter().map(|p| p * factor).collect();
            let v = length_proxy(&moved, &class, 0.0).unwrap();
            assert!((v - base).abs() < 1e-9 * base.abs().max(1.0));
        }
        // Interleaved clusters admit no round annulus.
        let interleaved = vec![c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let v = length_proxy(&interleaved, &class.clone(), 0.0);
        assert_eq!(v.unwrap(), f64::INFINITY);
        // Collisions are reported.
        let collided = vec![c(0.5, 0.5), c(0.5, 0.5), c(1.0, 0.0)];
        assert!(matches!(
            length_proxy(&collided, &Bipartition::new([1, 2], 3).unwrap(), 1e-13),
            Err(SpiderError::PointCollision { i: 1, j: 2 })
        ));
    }

    #[test]
    fn bipartitions_reject_inessential_classes() {
        assert!(Bipartition::new([1], 3).is_err());
        assert!(Bipartition::new([1, 2, 3], 3).is_err());
        assert!(Bipartition::new([1, 4], 3).is_err());
        assert!(Bipartition::new([2, 2], 3).is_err());
        assert_eq!(Bipartition::all_pairs(3).len(), 3);
        assert_eq!(Bipartition::all_pairs(2).len(), 0);
    }

    #[test]
    fn exact_orbit_configurations_are_fixed_by_the_step() {
        // The orbit of c = i: (i, i−1, −i).
        let config = SpiderConfiguration::new(
            sixth(),
            vec![c(0.0, 1.0), c(-1.0, 1.0), c(0.0, -1.0)],
        )
        .unwrap();
        let next = config.step(1e-9).unwrap();
        assert!(config.distance(&next) < 1e-12);
    }

    #[test]
    fn spider_runs_converge_to_the_angle_parameter() {
        // Angle 1/6 → c = i.
        let mut state = PullbackIterationState::new(
            SpiderConfiguration::standard_start(sixth()),
            Bipartition::all_pairs(3),
            &Thresholds::default(),
        )
        .unwrap();
        let status = state.run(200, &Thresholds::default()).unwrap().clone();
        match status {
            IterationStatus::Converged { c: estimate } => {
                assert!((estimate - c(0.0, 1.0)).norm() < 1e-6);
                assert!(orbit_relation_residual(sixth(), estimate) < 1e-8);
            }
            other => panic!("expected convergence, got {other:?}"),
        }

        // Angle 1/3 → c = −1 (the critical point itself is marked).
        let basilica = ExternalAngle::new(1, 3).unwrap();
        let mut state = PullbackIterationState::new(
            SpiderConfiguration::standard_start(basilica),
            Vec::new(),
            &Thresholds::default(),
        )
        .unwrap();
        match state.run(200, &Thresholds::default()).unwrap() {
            IterationStatus::Converged { c: estimate } => {
                assert!((estimate - c(-1.0, 0.0)).norm() < 1e-6);
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn random_admissible_starts_all_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(20260815);
        for trial in 0..20 {
            let start = SpiderConfiguration::admissible_start(sixth(), &mut rng);
            let mut state =
                PullbackIterationState::new(start, Bipartition::all_pairs(3), &Thresholds::default())
                    .unwrap();
            match state.run(200, &Thresholds::default()).unwrap() {
                IterationStatus::Converged { c: estimate } => {
                    assert!((estimate - c(0.0, 1.0)).norm() < 1e-6, "trial {trial}");
                }
                other => panic!("trial {trial}: expected convergence, got {other:?}"),
            }
        }
    }

    #[test]
    fn steps_are_deterministic_and_translation_gauge_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let start = SpiderConfiguration::admissible_start(sixth(), &mut rng);
        let a = start.step(1e-9).unwrap().step(1e-9).unwrap();
        let b = start.step(1e-9).unwrap().step(1e-9).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
        // Translating the whole picture (critical point included) changes
        // nothing after renormalization.
        let shifted = start.clone().with_critical_point(c(2.5, -1.25));
        let d = shifted.step(1e-9).unwrap().step(1e-9).unwrap();
        for (p, q) in a.points().iter().zip(d.points()) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }

    #[test]
    fn classification_handles_the_synthetic_cases() {
        let thresholds = Thresholds::default();
        // Constant configurations: converged at window 1.
        let classification = classify_sequences(&[0.0], &[], &thresholds);
        assert_eq!(classification.verdict, Verdict::Converged);
        // No steps: indeterminate.
        let classification = classify_sequences(&[], &[], &thresholds);
        assert_eq!(classification.verdict, Verdict::Indeterminate);
        // One proxy halving per step ends below the threshold: degenerate,
        // and the other class's infimum is reported as the floor.
        let halving: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        let steady: Vec<f64> = (0..30).map(|_| 2.0).collect();
        let classification =
            classify_sequences(&[1.0; 29], &[halving, steady], &thresholds);
        assert_eq!(classification.verdict, Verdict::Degenerate);
        assert_eq!(classification.shrinking, vec![0]);
        assert_eq!(classification.empirical_floor, Some(2.0));
    }

    #[test]
    fn zero_angle_collapses_to_the_monomial() {
        let zero = ExternalAngle::new(0, 1).unwrap();
        let mut state = PullbackIterationState::new(
            SpiderConfiguration::standard_start(zero),
            Vec::new(),
            &Thresholds::default(),
        )
        .unwrap();
        match state.run(10, &Thresholds::default()).unwrap() {
            IterationStatus::Converged { c: estimate } => {
                assert!(estimate.norm() < 1e-12);
            }
            other => panic!("expected convergence to 0, got {other:?}"),
        }
    }
}
