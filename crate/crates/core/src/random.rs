//! Random generation of valid self-coverings, for property tests.
//!
//! Rather than sampling raw wreath data and rejecting (almost nothing
//! random is a sphere covering), this module starts from an explicitly
//! valid one-parameter family — the [`telescope`] coverings — and applies
//! validity-preserving moves: renumbering the sheets, cyclically rotating
//! the punctures, re-choosing the lift basepoint paths (a gauge change),
//! and composing two coverings.  The result is an endless supply of
//! structurally diverse recursions that must all pass [`validate`],
//! suitable for fuzzing every downstream computation.
//!
//! [`validate`]: BranchedCoverRecursion::validate

use crate::recursion::{BranchedCoverRecursion, GeneratorAction};
use crate::words::{MarkedSphere, Word};
use rand::seq::SliceRandom;
use rand::Rng;

/// Bounds for [`random_self_cover`].
#[derive(Debug, Clone)]
pub struct SampleOptions {
    /// Inclusive upper bound for the covering degree (≥ 1).
    pub max_degree: usize,
    /// Inclusive upper bound for the puncture count (≥ 3).
    pub max_punctures: usize,
    /// Maximum length of each random gauge word.
    pub gauge_length: usize,
    /// Probability of composing two coverings when the degree bound allows.
    pub compose_probability: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            max_degree: 5,
            max_punctures: 6,
            gauge_length: 3,
            compose_probability: 0.3,
        }
    }
}

/// The basic valid degree-`d` self-covering of the `n`-punctured sphere
/// (`n ≥ 3`, `d ≥ 1`): puncture 1 cycles all `d` sheets and closes up to
/// its own loop, the middle punctures fix every sheet and are marked on
/// sheet 1, and puncture `n` cycles the sheets backwards, its lift on
/// sheet 1 completing the boundary relation.  Both critical cycles are
/// full, so the branching count `2d − 2` is exact.
pub fn telescope(n: usize, d: usize) -> BranchedCoverRecursion {
    assert!(n >= 3, "a sphere needs at least three punctures");
    assert!(d >= 1, "degree must be positive");
    let sphere = MarkedSphere::with_anonymous_labels(n).unwrap();
    let mut actions = Vec::with_capacity(n);

    let forward: Vec<usize> = (1..=d).map(|s| s % d + 1).collect();
    let mut lifts = vec![Word::identity(); d];
    lifts[d - 1] = Word::generator(1);
    actions.push(GeneratorAction { permutation: forward, lifts });

    for i in 2..n {
        let mut lifts = vec![Word::identity(); d];
        lifts[0] = Word::generator(i);
        actions.push(GeneratorAction { permutation: (1..=d).collect(), lifts });
    }

    let backward: Vec<usize> = (1..=d).map(|s| if s == 1 { d } else { s - 1 }).collect();
    let mut lifts = vec![Word::identity(); d];
    let mut completion = Word::identity();
    for j in (1..n).rev() {
        completion = completion.concat(&Word::generator(j).inverse());
    }
    lifts[0] = completion;
    actions.push(GeneratorAction { permutation: backward, lifts });

    BranchedCoverRecursion::new(sphere.clone(), sphere, d, actions).unwrap()
}

/// Re-chooses the lift basepoint paths: sheet `s`'s path is pre-composed
/// with `g[s-1]`, replacing each lift `u_{i,s}` by
/// `g_s · u_{i,s} · g_{s·x_i}⁻¹`.  Monodromy, portrait and validity are
/// untouched; only the cocycle's presentation changes.
pub fn gauge(f: &BranchedCoverRecursion, g: &[Word]) -> BranchedCoverRecursion {
    let d = f.degree();
    assert_eq!(g.len(), d, "one gauge word per sheet");
    let actions = f
        .actions()
        .iter()
        .map(|a| GeneratorAction {
            permutation: a.permutation.clone(),
            lifts: (1..=d)
                .map(|s| {
                    let img = a.permutation[s - 1];
                    g[s - 1].concat(&a.lifts[s - 1]).concat(&g[img - 1].inverse())
                })
                .collect(),
        })
        .collect();
    BranchedCoverRecursion::new(f.source().clone(), f.target().clone(), d, actions).unwrap()
}

/// Renumbers the sheets: old sheet `s` becomes `rho[s-1]`.
pub fn relabel_sheets(f: &BranchedCoverRecursion, rho: &[usize]) -> BranchedCoverRecursion {
    let d = f.degree();
    assert_eq!(rho.len(), d, "one image per sheet");
    let actions = f
        .actions()
        .iter()
        .map(|a| {
            let mut permutation = vec![0usize; d];
            let mut lifts = vec![Word::identity(); d];
            for s in 1..=d {
                permutation[rho[s - 1] - 1] = rho[a.permutation[s - 1] - 1];
                lifts[rho[s - 1] - 1] = a.lifts[s - 1].clone();
            }
            GeneratorAction { permutation, lifts }
        })
        .collect();
    BranchedCoverRecursion::new(f.source().clone(), f.target().clone(), d, actions).unwrap()
}

/// Cyclically rotates the puncture indices of a self-covering by `r`
/// (old index `j` becomes `((j−1+r) mod n)+1` on both spheres).  Cyclic
/// rotations are exactly the index relabelings compatible with the
/// boundary relation `x_1 ⋯ x_n = 1`, so validity is preserved.
pub fn rotate_punctures(f: &BranchedCoverRecursion, r: usize) -> BranchedCoverRecursion {
    assert_eq!(f.source(), f.target(), "rotation is defined for self-coverings");
    let n = f.source().n();
    let rho = |j: usize| (j - 1 + r) % n + 1;
    let rho_inv = |j: usize| (j - 1 + n - r % n) % n + 1;
    let images: Vec<Word> = (1..=n).map(|j| Word::generator(rho(j))).collect();
    let actions = (1..=n)
        .map(|i| {
            let a = &f.actions()[rho_inv(i) - 1];
            GeneratorAction {
                permutation: a.permutation.clone(),
                lifts: a.lifts.iter().map(|w| w.substitute(&images).unwrap()).collect(),
            }
        })
        .collect();
    BranchedCoverRecursion::new(f.source().clone(), f.target().clone(), f.degree(), actions)
        .unwrap()
}

/// Uniformly random freely reduced word over `n` letters, of reduced
/// length at most `max_len`.
pub fn random_word<R: Rng + ?Sized>(rng: &mut R, n: usize, max_len: usize) -> Word {
    let len = rng.gen_range(0..=max_len);
    let mut w = Word::identity();
    for _ in 0..len {
        let g = Word::generator(rng.gen_range(1..=n));
        let g = if rng.gen::<bool>() { g } else { g.inverse() };
        w = w.concat(&g);
    }
    w
}

/// Random conjugate `u·w·u⁻¹` with `|u| ≤ max_len`.
pub fn random_conjugate<R: Rng + ?Sized>(
    rng: &mut R,
    w: &Word,
    n: usize,
    max_len: usize,
) -> Word {
    let u = random_word(rng, n, max_len);
    u.concat(w).concat(&u.inverse())
}

fn random_permutation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<usize> {
    let mut rho: Vec<usize> = (1..=d).collect();
    rho.shuffle(rng);
    rho
}

fn scramble<R: Rng + ?Sized>(
    rng: &mut R,
    f: &BranchedCoverRecursion,
    opts: &SampleOptions,
) -> BranchedCoverRecursion {
    let n = f.source().n();
    let d = f.degree();
    let f = rotate_punctures(f, rng.gen_range(0..n));
    let f = relabel_sheets(&f, &random_permutation(rng, d));
    let g: Vec<Word> = (0..d).map(|_| random_word(rng, n, opts.gauge_length)).collect();
    gauge(&f, &g)
}

/// Samples a valid self-covering within the given bounds.  Every return
/// value passes [`BranchedCoverRecursion::validate`]; the distribution
/// covers all degrees `1..=max_degree` and puncture counts
/// `3..=max_punctures`, with composite (non-cyclic) monodromy appearing
/// through random composition.
pub fn random_self_cover<R: Rng + ?Sized>(
    rng: &mut R,
    opts: &SampleOptions,
) -> BranchedCoverRecursion {
    assert!(opts.max_degree >= 1 && opts.max_punctures >= 3);
    let n = rng.gen_range(3..=opts.max_punctures);
    let d = rng.gen_range(1..=opts.max_degree);
    let mut f = scramble(rng, &telescope(n, d), opts);
    if opts.max_degree / d >= 2 && rng.gen_bool(opts.compose_probability) {
        let inner_degree = rng.gen_range(2..=opts.max_degree / d);
        let inner = scramble(rng, &telescope(n, inner_degree), opts);
        f = f.after(&inner).unwrap();
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn telescopes_validate_at_all_supported_sizes() {
        for n in 3..=6 {
            for d in 1..=5 {
                let f = telescope(n, d);
                let report = f.validate().unwrap_or_else(|e| panic!("n={n} d={d}: {e}"));
                // Punctures 1 and n are fully critical, the middle ones
                // are not; everything is fixed.
                for (j, dc) in report.designations.iter().enumerate() {
                    assert_eq!(dc.target, j + 1, "telescope punctures are fixed");
                    let expected = if j == 0 || j == n - 1 { d } else { 1 };
                    assert_eq!(dc.degree(), expected, "n={n} d={d} puncture {}", j + 1);
                }
            }
        }
    }

    #[test]
    fn moves_preserve_validity_and_portrait_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = telescope(4, 3);
        let base = f.validate().unwrap();

        for _ in 0..20 {
            let g: Vec<Word> = (0..3).map(|_| random_word(&mut rng, 4, 4)).collect();
            let gauged = gauge(&f, &g);
            assert_eq!(gauged.validate().unwrap().portrait, base.portrait);

            let relabeled = relabel_sheets(&f, &random_permutation(&mut rng, 3));
            assert_eq!(relabeled.validate().unwrap().portrait, base.portrait);
        }

        // Rotation relabels the portrait: new puncture ρ(j) behaves as
        // old puncture j.
        let r = 2;
        let rotated = rotate_punctures(&f, r);
        let rotated_report = rotated.validate().unwrap();
        let n = 4;
        for j in 1..=n {
            let new_j = (j - 1 + r) % n + 1;
            let old = &base.designations[j - 1];
            let new = &rotated_report.designations[new_j - 1];
            assert_eq!(new.degree(), old.degree());
            assert_eq!(new.target, (old.target - 1 + r) % n + 1);
        }
    }

    #[test]
    fn randomized_covers_are_always_valid_and_diverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let opts = SampleOptions::default();
        let mut shapes: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut composite_monodromy = false;
        for i in 0..300 {
            let f = random_self_cover(&mut rng, &opts);
            assert!(f.degree() <= opts.max_degree);
            let report = f.validate().unwrap_or_else(|e| panic!("sample {i}: {e}"));
            assert_eq!(report.degree, f.degree());
            shapes.insert((f.degree(), f.source().n()));
            composite_monodromy |= f
                .actions()
                .iter()
                .any(|a| {
                    let mut seen = vec![false; f.degree()];
                    let mut cycles = Vec::new();
                    for start in 1..=f.degree() {
                        if seen[start - 1] {
                            continue;
                        }
                        let mut len = 0;
                        let mut s = start;
                        while !seen[s - 1] {
                            seen[s - 1] = true;
                            len += 1;
                            s = a.permutation[s - 1];
                        }
                        cycles.push(len);
                    }
                    cycles.iter().filter(|&&l| l > 1).count() >= 2
                });
        }
        for d in 1..=5 {
            for n in 3..=6 {
                assert!(shapes.contains(&(d, n)), "no sample with degree {d}, {n} punctures");
            }
        }
        assert!(composite_monodromy, "compositions should produce non-cyclic branching");
    }
}
