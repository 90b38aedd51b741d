//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.  Tolerances are pinned here, next to the checks that
//! use them.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thurston_kit::combine::combine;
use thurston_kit::decompose::{decompose, first_return_maps, TreeSpec};
use thurston_kit::fixtures;
use thurston_kit::matrix::{
    rational_to_f64, CertifyOptions, ThresholdComparison, TransitionMatrix,
};
use thurston_kit::portrait::{Portrait, Weight};
use thurston_kit::pullback::{pullback_class, transition_data};
use thurston_kit::random::{random_conjugate, random_self_cover, random_word, SampleOptions};
use thurston_kit::search::{search_obstruction, ObstructionOutcome, SearchBudget, SearchError};
use thurston_kit::spider::{
    collar_fixed_point, collar_width, orbit_relation_residual, Bipartition, ExternalAngle,
    IterationStatus, PullbackIterationState, SpiderConfiguration, Thresholds,
};

enum Outcome {
    Pass(String),
    // Constructed only when the mating feature is disabled.
    #[allow(dead_code)]
    Skip(String),
}

type Criterion = fn() -> Result<Outcome, String>;

fn main() -> ExitCode {
    let criteria: [(usize, &str, Criterion); 9] = [
        (1, "certified spectral enclosures", criterion_1),
        (2, "randomized pullback invariants", criterion_2),
        (3, "orbifold of the preperiodic quadratic", criterion_3),
        (4, "obstruction search verdicts", criterion_4),
        (5, "fixture decompose/combine roundtrips", criterion_5),
        (6, "first-return pieces of obstructed fixtures", criterion_6),
        (7, "spider convergence at angle 1/6", criterion_7),
        (8, "collar width fixed point and monotonicity", criterion_8),
        (9, "obstructed mating degenerates", criterion_9),
    ];
    let mut failures = 0;
    for (number, name, run) in criteria {
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(Outcome::Pass(detail))) => {
                println!("ACCEPTANCE {number} PASS — {name}: {detail}");
            }
            Ok(Ok(Outcome::Skip(detail))) => {
                println!("ACCEPTANCE {number} SKIP — {name}: {detail}");
            }
            Ok(Err(detail)) => {
                failures += 1;
                println!("ACCEPTANCE {number} FAIL — {name}: {detail}");
            }
            Err(panic) => {
                failures += 1;
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "non-string panic payload".to_string());
                println!("ACCEPTANCE {number} FAIL — {name}: panicked: {msg}");
            }
        }
    }
    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rows(entries: &[&[&str]]) -> Vec<Vec<String>> {
    entries
        .iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

/// Criterion 1: power-iteration certification produces enclosures of
/// width <= 1e-9 for three small matrices, each containing the true
/// spectral radius, in under a second.
fn criterion_1() -> Result<Outcome, String> {
    let started = Instant::now();
    let width_bound = rat(1, 1_000_000_000);
    let options = CertifyOptions::default();

    let check = |entries: &[&[&str]],
                 contains: &dyn Fn(&BigRational, &BigRational) -> bool,
                 label: &str,
                 expected: ThresholdComparison|
     -> Result<(BigRational, BigRational), String> {
        let m = TransitionMatrix::from_strings(&rows(entries))
            .map_err(|e| format!("building {label}: {e}"))?;
        let cert = m
            .certify_spectral_radius(&options)
            .map_err(|e| format!("certifying {label}: {e}"))?;
        let width = &cert.high - &cert.low;
        if width > width_bound {
            return Err(format!(
                "{label}: enclosure width {} exceeds 1e-9",
                rational_to_f64(&width)
            ));
        }
        if !contains(&cert.low, &cert.high) {
            return Err(format!(
                "{label}: enclosure [{}, {}] misses the true spectral radius",
                cert.low, cert.high
            ));
        }
        if cert.comparison_with_one != expected {
            return Err(format!(
                "{label}: comparison with 1 is {:?}, expected {:?}",
                cert.comparison_with_one, expected
            ));
        }
        Ok((cert.low, cert.high))
    };

    let half = rat(1, 2);
    check(
        &[&["1/2"]],
        &|low, high| *low <= half && half <= *high,
        "[[1/2]]",
        ThresholdComparison::Below,
    )?;
    let one = BigRational::one();
    check(
        &[&["1"]],
        &|low, high| *low <= one && one <= *high,
        "[[1]]",
        ThresholdComparison::AtLeast,
    )?;
    // Spectral radius sqrt(1/2): certified containment is low^2 <= 1/2
    // <= high^2 (low >= 0 since the matrix is nonnegative).
    let (low, high) = check(
        &[&["0", "1"], &["1/2", "0"]],
        &|low, high| {
            *low >= BigRational::from(BigInt::from(0))
                && low * low <= half
                && half <= high * high
        },
        "[[0,1],[1/2,0]]",
        ThresholdComparison::Below,
    )?;

    let elapsed = started.elapsed();
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("certification took {elapsed:?}, budget is 1s"));
    }
    Ok(Outcome::Pass(format!(
        "3 enclosures of width <= 1e-9 in {elapsed:?}; sqrt(1/2) in [{:.12}, {:.12}]",
        rational_to_f64(&low),
        rational_to_f64(&high)
    )))
}

/// Criterion 2: over >= 1000 random valid self-covers (degree <= 5,
/// <= 6 punctures) and random words of length <= 12, the pullback
/// component degrees always sum to the covering degree, and the
/// component class/degree multiset is unchanged under 100 random
/// conjugations of the input word per case.
fn criterion_2() -> Result<Outcome, String> {
    const CASES: usize = 1000;
    const CONJUGATIONS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0x2026_0815);
    let options = SampleOptions::default();

    let multiset = |f: &thurston_kit::recursion::BranchedCoverRecursion,
                    w: &thurston_kit::words::Word|
     -> Result<(usize, Vec<(String, usize)>), String> {
        let components = pullback_class(f, w).map_err(|e| format!("pullback failed: {e}"))?;
        let total: usize = components.iter().map(|c| c.mapping_degree).sum();
        let mut keyed: Vec<(String, usize)> = components
            .iter()
            .map(|c| (c.class.key().to_string(), c.mapping_degree))
            .collect();
        keyed.sort();
        Ok((total, keyed))
    };

    for case in 0..CASES {
        let f = random_self_cover(&mut rng, &options);
        let n = f.source().n();
        let w = random_word(&mut rng, n, 12);
        let (total, base) = multiset(&f, &w)?;
        if total != f.degree() {
            return Err(format!(
                "case {case}: component degrees sum to {total}, covering degree is {}",
                f.degree()
            ));
        }
        for rep in 0..CONJUGATIONS {
            let conj = random_conjugate(&mut rng, &w, n, 12);
            let (conj_total, conj_set) = multiset(&f, &conj)?;
            if conj_total != f.degree() || conj_set != base {
                return Err(format!(
                    "case {case}, conjugation {rep}: pullback of a conjugate \
                     word differs from the base word's pullback"
                ));
            }
        }
    }
    Ok(Outcome::Pass(format!(
        "{CASES} covers x {CONJUGATIONS} conjugations: degree sums and class multisets invariant"
    )))
}

/// Brute-force orbifold weights from portrait data alone: the weight at
/// puncture y is the lcm of d*N(w) over marked preimages w (local degree
/// d) and of the unmarked critical degrees at y, with N = infinity on
/// puncture cycles whose local degrees multiply to more than 1.
fn oracle_weights(
    n: usize,
    image: &[usize],
    local_degree: &[usize],
    extra_critical: &[Vec<usize>],
) -> Result<Vec<Weight>, String> {
    let mut weights: Vec<Weight> = vec![Weight::Finite(1); n];

    // Mark cycles whose local-degree product exceeds 1 as infinite.
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut at = start;
        while !seen[at] {
            seen[at] = true;
            at = image[at];
        }
        // `at` now lies on the cycle reachable from `start`.
        let cycle_entry = at;
        let mut product: u128 = 1;
        let mut members = Vec::new();
        loop {
            members.push(at);
            product = product.saturating_mul(local_degree[at] as u128);
            at = image[at];
            if at == cycle_entry {
                break;
            }
        }
        if product > 1 {
            for m in members {
                weights[m] = Weight::Infinite;
            }
        }
    }

    // Propagate lcm constraints to a fixed point (the puncture graph is a
    // tree into cycles, so n rounds suffice; one extra verifies stability).
    for round in 0..=n + 1 {
        let mut changed = false;
        for w in 0..n {
            let y = image[w];
            let need = match weights[w] {
                Weight::Infinite => Weight::Infinite,
                Weight::Finite(v) => Weight::Finite(v * local_degree[w] as u128),
            };
            let updated = weight_lcm(weights[y], need);
            if updated != weights[y] {
                weights[y] = updated;
                changed = true;
            }
        }
        for y in 0..n {
            for &d in &extra_critical[y] {
                let updated = weight_lcm(weights[y], Weight::Finite(d as u128));
                if updated != weights[y] {
                    weights[y] = updated;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(weights);
        }
        if round == n + 1 {
            return Err("weight recursion did not stabilize".to_string());
        }
    }
    Ok(weights)
}

fn weight_lcm(a: Weight, b: Weight) -> Weight {
    match (a, b) {
        (Weight::Infinite, _) | (_, Weight::Infinite) => Weight::Infinite,
        (Weight::Finite(x), Weight::Finite(y)) => Weight::Finite(num_integer::lcm(x, y)),
    }
}

fn oracle_signature(weights: &[Weight]) -> Vec<Weight> {
    let mut sig: Vec<Weight> = weights
        .iter()
        .copied()
        .filter(|w| !matches!(w, Weight::Finite(1)))
        .collect();
    sig.sort();
    sig
}

fn oracle_chi(weights: &[Weight]) -> BigRational {
    let mut chi = BigRational::from(BigInt::from(2));
    for w in weights {
        let term = match w {
            Weight::Infinite => BigRational::one(),
            Weight::Finite(v) => {
                BigRational::one() - BigRational::new(BigInt::from(1), BigInt::from(*v))
            }
        };
        chi -= term;
    }
    chi
}

fn portrait_data(p: &Portrait) -> (usize, Vec<usize>, Vec<usize>, Vec<Vec<usize>>) {
    let n = p.target().n();
    let image: Vec<usize> = (1..=n).map(|i| p.image_of(i) - 1).collect();
    let local: Vec<usize> = (1..=n).map(|i| p.local_degree(i)).collect();
    let extra: Vec<Vec<usize>> = (1..=n).map(|i| p.unmarked_critical_degrees(i).to_vec()).collect();
    (n, image, local, extra)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Criterion 3: the preperiodic quadratic (critical value i, orbit
/// i -> i-1 -> -i -> i-1) has orbifold signature (2,2,2,inf) with
/// Euler characteristic exactly -1/2, and an independent brute-force
/// weight computation agrees under every relabeling of the punctures.
fn criterion_3() -> Result<Outcome, String> {
    let f = fixtures::quadratic_preperiodic();
    let report = f.validate().map_err(|e| format!("fixture failed validation: {e}"))?;
    let orbifold = report
        .portrait
        .orbifold()
        .map_err(|e| format!("orbifold computation failed: {e}"))?;

    let expected_signature = vec![
        Weight::Finite(2),
        Weight::Finite(2),
        Weight::Finite(2),
        Weight::Infinite,
    ];
    if orbifold.signature != expected_signature {
        return Err(format!("signature is {:?}, expected (2,2,2,inf)", orbifold.signature));
    }
    if orbifold.euler_characteristic != rat(-1, 2) {
        return Err(format!(
            "Euler characteristic is {}, expected -1/2 exactly",
            orbifold.euler_characteristic
        ));
    }

    // Independent oracle on the portrait data, then equivariance over
    // all 4! puncture orders.
    let (n, image, local, extra) = portrait_data(&report.portrait);
    let base = oracle_weights(n, &image, &local, &extra)?;
    if base != orbifold.weights {
        return Err(format!(
            "oracle weights {base:?} disagree with library weights {:?}",
            orbifold.weights
        ));
    }
    if oracle_signature(&base) != orbifold.signature {
        return Err("oracle signature disagrees with library signature".to_string());
    }
    if oracle_chi(&base) != orbifold.euler_characteristic {
        return Err("oracle Euler characteristic disagrees with library value".to_string());
    }

    let all_orders = permutations(n);
    for sigma in &all_orders {
        let mut image_p = vec![0usize; n];
        let mut local_p = vec![0usize; n];
        let mut extra_p = vec![Vec::new(); n];
        for i in 0..n {
            image_p[sigma[i]] = sigma[image[i]];
            local_p[sigma[i]] = local[i];
            extra_p[sigma[i]] = extra[i].clone();
        }
        let permuted = oracle_weights(n, &image_p, &local_p, &extra_p)?;
        for i in 0..n {
            if permuted[sigma[i]] != base[i] {
                return Err(format!(
                    "weights are not equivariant under the relabeling {sigma:?}"
                ));
            }
        }
        if oracle_signature(&permuted) != orbifold.signature {
            return Err(format!("signature changed under the relabeling {sigma:?}"));
        }
    }
    Ok(Outcome::Pass(format!(
        "signature (2,2,2,inf), chi = -1/2 exactly, {} puncture orders agree",
        all_orders.len()
    )))
}

/// Criterion 4: the glued Levy pair yields a certified obstruction with
/// lambda enclosed in [1, 1]; the preperiodic quadratic yields
/// NoneFoundWithinBudget under default seeds and budget; each search
/// finishes in under five seconds.
fn criterion_4() -> Result<Outcome, String> {
    let options = CertifyOptions::default();
    let budget = SearchBudget::default();
    if budget.max_iterations != 10 {
        return Err(format!(
            "default saturation budget is {}, expected 10",
            budget.max_iterations
        ));
    }

    let started = Instant::now();
    let glued = combine(&fixtures::levy_pair_manifest())
        .map_err(|e| format!("combine failed: {e}"))?;
    let outcome = search_obstruction(&glued.recursion, None, &budget, &options)
        .map_err(|e| format!("search on the Levy pair failed: {e}"))?;
    let levy_elapsed = started.elapsed();
    let one = BigRational::one();
    match &outcome {
        ObstructionOutcome::Found { report } => {
            if report.spectral.low != one || report.spectral.high != one {
                return Err(format!(
                    "Levy pair obstruction has lambda in [{}, {}], expected [1, 1]",
                    report.spectral.low, report.spectral.high
                ));
            }
        }
        other => return Err(format!("Levy pair search returned {other:?}, expected Found")),
    }
    if levy_elapsed >= Duration::from_secs(5) {
        return Err(format!("Levy pair search took {levy_elapsed:?}, budget is 5s"));
    }

    let started = Instant::now();
    let quadratic = fixtures::quadratic_preperiodic();
    let outcome = search_obstruction(&quadratic, None, &budget, &options)
        .map_err(|e| format!("search on the quadratic failed: {e}"))?;
    let quad_elapsed = started.elapsed();
    match &outcome {
        ObstructionOutcome::NoneFoundWithinBudget { seeds_examined, .. } => {
            if *seeds_examined == 0 {
                return Err("quadratic search examined no seeds".to_string());
            }
        }
        other => {
            return Err(format!(
                "quadratic search returned {other:?}, expected NoneFoundWithinBudget"
            ))
        }
    }
    if quad_elapsed >= Duration::from_secs(5) {
        return Err(format!("quadratic search took {quad_elapsed:?}, budget is 5s"));
    }
    Ok(Outcome::Pass(format!(
        "Levy pair: lambda in [1, 1] in {levy_elapsed:?}; quadratic: none found in {quad_elapsed:?}"
    )))
}

/// Criterion 5: every bundled gluing manifest (at least five, spanning
/// degrees 2-4 and 4-7 punctures) survives decompose-after-combine with
/// per-piece degree, portrait, and orbifold signature preserved exactly.
fn criterion_5() -> Result<Outcome, String> {
    let manifests = fixtures::bundled_manifests();
    if manifests.len() < 5 {
        return Err(format!("only {} bundled manifests, expected at least 5", manifests.len()));
    }
    let mut degrees = BTreeSet::new();
    let mut punctures = BTreeSet::new();
    for (name, manifest) in &manifests {
        let cover =
            combine(manifest).map_err(|e| format!("combine failed for {name}: {e}"))?;
        degrees.insert(cover.recursion.degree());
        punctures.insert(cover.recursion.source().n());
        fixtures::verify_roundtrip(manifest).map_err(|e| format!("{name}: {e}"))?;
    }
    for d in 2..=4 {
        if !degrees.contains(&d) {
            return Err(format!("no bundled fixture of degree {d}; have {degrees:?}"));
        }
    }
    for n in 4..=7 {
        if !punctures.contains(&n) {
            return Err(format!("no bundled fixture with {n} punctures; have {punctures:?}"));
        }
    }
    Ok(Outcome::Pass(format!(
        "{} fixtures, degrees {degrees:?}, punctures {punctures:?}, all roundtrips exact",
        manifests.len()
    )))
}

/// Criterion 6: for every bundled fixture whose gluing multicurve is a
/// certified obstruction, each first-return piece of degree >= 2 with a
/// hyperbolic orbifold passes the obstruction search with verdict
/// NoneFoundWithinBudget (budget: 10 saturation iterations, 64 classes).
fn criterion_6() -> Result<Outcome, String> {
    let options = CertifyOptions::default();
    let budget = SearchBudget { max_iterations: 10, max_classes: 64 };
    let mut obstructed = Vec::new();
    let mut searched = 0usize;
    let mut curveless = 0usize;

    for (name, manifest) in fixtures::bundled_manifests() {
        let cover = combine(&manifest).map_err(|e| format!("combine failed for {name}: {e}"))?;
        let data = transition_data(&cover.recursion, &cover.multicurve)
            .map_err(|e| format!("transition data failed for {name}: {e}"))?;
        let cert = data
            .matrix
            .certify_spectral_radius(&options)
            .map_err(|e| format!("certification failed for {name}: {e}"))?;
        if cert.comparison_with_one != ThresholdComparison::AtLeast {
            continue;
        }
        obstructed.push(name.to_string());

        let tree = TreeSpec::from_combined(&manifest, &cover);
        let pieces = decompose(&cover.recursion, &cover.multicurve, &tree)
            .map_err(|e| format!("decompose failed for {name}: {e}"))?;
        for piece in first_return_maps(&pieces)
            .map_err(|e| format!("first returns failed for {name}: {e}"))?
        {
            let orbifold = piece
                .report
                .portrait
                .orbifold()
                .map_err(|e| format!("orbifold failed for {name}/{}: {e}", piece.node))?;
            if piece.recursion.degree() < 2 || !orbifold.is_hyperbolic() {
                continue;
            }
            match search_obstruction(&piece.recursion, None, &budget, &options) {
                Ok(ObstructionOutcome::NoneFoundWithinBudget { .. }) => searched += 1,
                // Fewer than four punctures carry no essential curve at
                // all, so no obstruction can exist on such a piece.
                Err(SearchError::NoEssentialCurves) => curveless += 1,
                Ok(other) => {
                    return Err(format!(
                        "{name}/{} (degree {}, hyperbolic) returned {other:?}",
                        piece.node,
                        piece.recursion.degree()
                    ))
                }
                Err(e) => return Err(format!("search failed for {name}/{}: {e}", piece.node)),
            }
        }
    }
    if obstructed.is_empty() {
        return Err("no bundled fixture is certified obstructed".to_string());
    }
    if searched == 0 {
        return Err(format!(
            "no hyperbolic piece of degree >= 2 was actually searched in {obstructed:?}"
        ));
    }
    Ok(Outcome::Pass(format!(
        "obstructed fixtures {obstructed:?}: {searched} piece(s) searched clean, {curveless} without essential curves"
    )))
}

/// Criterion 7: from 20 random admissible starts at external angle 1/6,
/// the pullback iteration converges within 200 steps, the recovered
/// parameter is within 1e-6 of i, and the orbit relation residual is
/// below 1e-8.
fn criterion_7() -> Result<Outcome, String> {
    let angle = ExternalAngle::parse("1/6").map_err(|e| e.to_string())?;
    let thresholds = Thresholds::default();
    let target = Complex64::new(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_815);
    let mut worst_error: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let mut most_steps = 0usize;

    for trial in 0..20 {
        let start = SpiderConfiguration::admissible_start(angle, &mut rng);
        let tracked = Bipartition::all_pairs(start.points().len());
        let mut state = PullbackIterationState::new(start, tracked, &thresholds)
            .map_err(|e| format!("trial {trial}: bad start: {e}"))?;
        state
            .run(200, &thresholds)
            .map_err(|e| format!("trial {trial}: iteration error: {e}"))?;
        let c = match state.status() {
            IterationStatus::Converged { c } => *c,
            other => return Err(format!("trial {trial}: status {other:?} after 200 steps")),
        };
        let error = (c - target).norm();
        if error >= 1e-6 {
            return Err(format!("trial {trial}: |c - i| = {error:.3e} >= 1e-6"));
        }
        let residual = orbit_relation_residual(angle, c);
        if residual >= 1e-8 {
            return Err(format!("trial {trial}: orbit residual {residual:.3e} >= 1e-8"));
        }
        worst_error = worst_error.max(error);
        worst_residual = worst_residual.max(residual);
        most_steps = most_steps.max(state.steps());
    }
    Ok(Outcome::Pass(format!(
        "20/20 converged within {most_steps} steps; worst |c - i| = {worst_error:.2e}, worst residual = {worst_residual:.2e}"
    )))
}

/// Criterion 8: the collar width function fixes 2*arcsinh(1) to within
/// 1e-12 and is strictly decreasing across a 10^4-point grid on (0, 20].
fn criterion_8() -> Result<Outcome, String> {
    let fixed = collar_fixed_point();
    let at_fixed = collar_width(fixed).map_err(|e| e.to_string())?;
    let defect = (at_fixed - fixed).abs();
    if defect > 1e-12 {
        return Err(format!("|s(2 arcsinh 1) - 2 arcsinh 1| = {defect:.3e} > 1e-12"));
    }

    const GRID: usize = 10_000;
    let step = 20.0 / GRID as f64;
    let mut previous = collar_width(step).map_err(|e| e.to_string())?;
    for k in 2..=GRID {
        let x = k as f64 * step;
        let value = collar_width(x).map_err(|e| e.to_string())?;
        if value >= previous {
            return Err(format!("not strictly decreasing at x = {x}: s = {value} >= {previous}"));
        }
        previous = value;
    }
    Ok(Outcome::Pass(format!(
        "fixed-point defect {defect:.2e}; strictly decreasing on a {GRID}-point grid"
    )))
}

/// Criterion 9: the obstructed basilica self-mating degenerates within
/// 100 steps with a nonempty shrinking set, and every proxy sample of
/// every non-shrinking tracked class stays at or above the reported
/// empirical floor.
#[cfg(feature = "mating")]
fn criterion_9() -> Result<Outcome, String> {
    use thurston_kit::mating::BasilicaSelfMating;

    let thresholds = Thresholds::default();
    let start = Complex64::new(0.4, 0.3);
    let mut run = BasilicaSelfMating::new(
        start,
        BasilicaSelfMating::default_tracked(),
        &thresholds,
    )
    .map_err(|e| format!("bad start: {e}"))?;
    run.run(100, &thresholds).map_err(|e| format!("iteration error: {e}"))?;

    let shrinking_labels = match run.status() {
        IterationStatus::Degenerate { shrinking, .. } if !shrinking.is_empty() => {
            shrinking.iter().map(|b| b.label()).collect::<Vec<_>>().join(" | ")
        }
        IterationStatus::Degenerate { .. } => {
            return Err("degenerate verdict with an empty shrinking set".to_string())
        }
        other => return Err(format!("status {other:?} after 100 steps, expected Degenerate")),
    };

    let classification = run.classification(&thresholds);
    let floor = classification
        .empirical_floor
        .ok_or("no non-shrinking tracked class to report a floor for")?;
    if !(floor > 0.0) {
        return Err(format!("reported empirical floor {floor} is not positive"));
    }
    for (index, class) in run.tracked().iter().enumerate() {
        if classification.shrinking.contains(&index) {
            continue;
        }
        for &proxy in &run.proxies()[index] {
            if proxy < floor {
                return Err(format!(
                    "class {{{}}} dipped to {proxy:.3e}, below the reported floor {floor:.3e}",
                    class.label()
                ));
            }
        }
    }
    Ok(Outcome::Pass(format!(
        "degenerate after {} steps; shrinking {{{shrinking_labels}}}; floor {floor:.3e} respected",
        run.steps()
    )))
}

#[cfg(not(feature = "mating"))]
fn criterion_9() -> Result<Outcome, String> {
    Ok(Outcome::Skip(
        "built without the mating feature (enable with --features mating)".to_string(),
    ))
}
