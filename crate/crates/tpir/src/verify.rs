//! Verification harness: rank audits of generated queries, exhaustive and
//! statistical privacy tests on coalition views, and exact rate measurement.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::params::{derive_params, SchemeConfig, SchemeParams};
use crate::scheme::{
    build_schedule, generate_queries, queries_from_mix, subsets_of_size, MixState, QuerySet,
    Schedule,
};

/// Hard cap on the enumerated randomness space for exhaustive privacy.
const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

/// Measured vs expected ranks for one query set.
#[derive(Debug, Clone)]
pub struct RankAudit {
    /// rank of the desired block across all N servers; expected L
    pub full_desired_rank: usize,
    /// per size-T coalition: (coalition, desired-block rank, undesired-block rank)
    pub coalitions: Vec<(Vec<usize>, usize, usize)>,
    pub expected_full: usize,
    pub expected_desired: usize,
    pub expected_undesired: usize,
    pub pass: bool,
}

/// Check the rank identities on a generated query set: the desired block
/// has rank L over all servers, and every size-T coalition sees desired
/// rank TL/N and undesired rank D - L.
pub fn audit_ranks(query_set: &QuerySet, params: &SchemeParams) -> Result<RankAudit> {
    let n = params.config.servers;
    let t = params.config.collusion;
    let m = params.config.records;
    let theta = query_set.theta;
    let others: Vec<usize> = (0..m).filter(|&i| i != theta).collect();
    let all: Vec<usize> = (0..n).collect();

    let expected_full = params.sub_packetization;
    let expected_desired = t * params.sub_packetization / n;
    let expected_undesired = params.download - params.sub_packetization;

    let full_desired_rank = query_set.stacked_block(&[theta], &all)?.rank();
    let mut pass = full_desired_rank == expected_full;
    let mut coalitions = vec![];
    for gamma in subsets_of_size(n, t) {
        let desired = query_set.stacked_block(&[theta], &gamma)?.rank();
        let undesired = query_set.stacked_block(&others, &gamma)?.rank();
        pass &= desired == expected_desired && undesired == expected_undesired;
        coalitions.push((gamma, desired, undesired));
    }
    Ok(RankAudit {
        full_desired_rank,
        coalitions,
        expected_full,
        expected_desired,
        expected_undesired,
        pass,
    })
}

#[derive(Debug, Clone)]
pub enum PrivacyMode {
    /// full enumeration of the randomness space; distance is exact
    Exhaustive,
    /// seeded sampling; distance compared against a heuristic threshold
    Statistical { trials: usize, seed: u64 },
}

/// Result of comparing the theta-indexed coalition-view distributions.
#[derive(Debug, Clone)]
pub struct PrivacyReport {
    pub config: SchemeConfig,
    pub q: u64,
    pub coalition: Vec<usize>,
    pub mode: PrivacyMode,
    /// number of query sets observed per theta
    pub samples_per_theta: usize,
    /// union support size across all theta
    pub support: usize,
    /// max pairwise total-variation distance
    pub distance: f64,
    /// numerator of the exact distance is zero (exhaustive mode only)
    pub exact_zero: bool,
    pub threshold: f64,
    pub pass: bool,
}

impl PrivacyReport {
    pub fn render_text(&self) -> String {
        format!(
            "privacy ({},{},{}) q={} coalition={:?}: samples/theta={} support={} TV={:.6} threshold={:.6} -> {}",
            self.config.servers,
            self.config.collusion,
            self.config.records,
            self.q,
            self.coalition,
            self.samples_per_theta,
            self.support,
            self.distance,
            self.threshold,
            if self.pass { "pass" } else { "FAIL" }
        )
    }

    /// CSV: N,T,M,q,coalition,samples,support,tv,threshold,pass
    pub fn render_machine(&self) -> String {
        let coalition: Vec<String> = self.coalition.iter().map(|c| c.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.config.servers,
            self.config.collusion,
            self.config.records,
            self.q,
            coalition.join("+"),
            self.samples_per_theta,
            self.support,
            self.distance,
            self.threshold,
            self.pass
        )
    }
}

fn validate_coalition(config: &SchemeConfig, coalition: &[usize]) -> Result<()> {
    let mut sorted = coalition.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != coalition.len() {
        return Err(Error::InvalidConfig("duplicate server in coalition".into()));
    }
    if coalition.iter().any(|&j| j >= config.servers) {
        return Err(Error::InvalidConfig("coalition server out of range".into()));
    }
    Ok(())
}

/// All matrices of the given shape with full column rank, in lexicographic
/// entry order. Enumeration cost is q^(rows*cols).
fn enumerate_full_rank(
    field: PrimeField,
    rows: usize,
    cols: usize,
) -> Vec<FieldMatrix> {
    let q = field.order();
    let cells = rows * cols;
    let total = (q as u128).pow(cells as u32);
    let mut out = vec![];
    for idx in 0..total {
        let mut rem = idx;
        let mut entries = vec![0u64; cells];
        for e in entries.iter_mut() {
            *e = (rem % q as u128) as u64;
            rem /= q as u128;
        }
        let m = FieldMatrix::from_entries(field, rows, cols, entries).expect("valid entries");
        if m.rank() == cols {
            out.push(m);
        }
    }
    out
}

/// Number of rows x cols matrices over GF(q) with full column rank:
/// prod_{i<cols} (q^rows - q^i). None on overflow (far beyond the
/// exhaustive limit anyway).
fn count_full_rank(q: u64, rows: usize, cols: usize) -> Option<u128> {
    let qr = (q as u128).checked_pow(rows as u32)?;
    let mut total = 1u128;
    for i in 0..cols {
        total = total.checked_mul(qr - (q as u128).checked_pow(i as u32)?)?;
    }
    Some(total)
}

/// Exact privacy check by enumerating the entire randomness space per theta
/// and comparing the coalition-view distributions bit-exactly.
pub fn privacy_exhaustive(
    config: SchemeConfig,
    q: u64,
    coalition: &[usize],
) -> Result<PrivacyReport> {
    config.validate()?;
    validate_coalition(&config, coalition)?;
    let params = derive_params(config)?;
    let field = PrimeField::new(q)?;
    params.check_field(q)?;
    let schedule = build_schedule(&params)?;
    let l = params.sub_packetization;
    let ell = params.mixing_width;
    let m = config.records;

    let states = (|| {
        let mut s = count_full_rank(q, l, l)?;
        for _ in 1..m {
            s = s.checked_mul(count_full_rank(q, l, ell)?)?;
        }
        Some(s)
    })()
    .unwrap_or(u128::MAX);
    if states > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLargeForExhaustive { size: states });
    }

    let invertible = enumerate_full_rank(field, l, l);
    let mixers = enumerate_full_rank(field, l, ell);

    let mut dists: Vec<HashMap<Vec<u64>, u64>> = vec![];
    for theta in 0..m {
        let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
        let mut choice = vec![0usize; m - 1];
        loop {
            for s_theta in &invertible {
                let mut mix_list: Vec<Option<FieldMatrix>> = Vec::with_capacity(m);
                let mut c = 0;
                for i in 0..m {
                    if i == theta {
                        mix_list.push(None);
                    } else {
                        mix_list.push(Some(mixers[choice[c]].clone()));
                        c += 1;
                    }
                }
                let qs = queries_from_mix(
                    &schedule,
                    field,
                    MixState {
                        theta,
                        s_theta: s_theta.clone(),
                        mixers: mix_list,
                    },
                )?;
                *counts.entry(qs.coalition_view(coalition)).or_default() += 1;
            }
            // odometer over the undesired-record mixer choices
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    break;
                }
                choice[pos] += 1;
                if choice[pos] < mixers.len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
        dists.push(counts);
    }

    let per_theta = (states / 1) as u64;
    let (num, support) = max_pairwise_tv_counts(&dists);
    let distance = num as f64 / (2.0 * per_theta as f64);
    Ok(PrivacyReport {
        config,
        q,
        coalition: coalition.to_vec(),
        mode: PrivacyMode::Exhaustive,
        samples_per_theta: per_theta as usize,
        support,
        distance,
        exact_zero: num == 0,
        threshold: 0.0,
        pass: num == 0,
    })
}

/// Largest pairwise L1 count difference across the theta-indexed
/// distributions, plus the union support size. All distributions must hold
/// the same total count.
fn max_pairwise_tv_counts(dists: &[HashMap<Vec<u64>, u64>]) -> (u64, usize) {
    let mut union: Vec<&Vec<u64>> = vec![];
    for d in dists {
        for k in d.keys() {
            if !union.contains(&k) {
                union.push(k);
            }
        }
    }
    let mut worst = 0u64;
    for a in 0..dists.len() {
        for b in a + 1..dists.len() {
            let l1: u64 = union
                .iter()
                .map(|k| {
                    let ca = dists[a].get(*k).copied().unwrap_or(0);
                    let cb = dists[b].get(*k).copied().unwrap_or(0);
                    ca.abs_diff(cb)
                })
                .sum();
            worst = worst.max(l1);
        }
    }
    (worst, union.len())
}

/// Row indices where the column space of `a` gains rank: the pivot rows of
/// its column echelon form, a cheap invariant of the spanned subspace.
fn pivot_rows(a: &FieldMatrix) -> Vec<u64> {
    let field = a.field();
    let mut m = a.transpose();
    let (rows, cols) = (m.rows(), m.cols());
    let mut pivots = vec![];
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| m[(i, c)] != 0) else {
            continue;
        };
        if p != r {
            for j in c..cols {
                let tmp = m[(r, j)];
                m[(r, j)] = m[(p, j)];
                m[(p, j)] = tmp;
            }
        }
        let inv = field.inv(m[(r, c)]).expect("pivot is nonzero");
        for i in r + 1..rows {
            if m[(i, c)] != 0 {
                let factor = field.mul(m[(i, c)], inv);
                for j in c..cols {
                    m[(i, j)] = field.sub(m[(i, j)], field.mul(factor, m[(r, j)]));
                }
            }
        }
        pivots.push(c as u64);
        r += 1;
        if r == rows {
            break;
        }
    }
    pivots
}

/// Canonicalized coalition view for statistical mode: per-server column
/// count and column-space pivot rows, plus the pivot rows of the joined
/// coalition matrix. The support stays small enough for the TV threshold
/// to bite, while an unmixed desired record shifts the pivot pattern into
/// that record's row block and is caught.
fn canonical_view(qs: &QuerySet, coalition: &[usize]) -> Vec<u64> {
    let mut sorted = coalition.to_vec();
    sorted.sort_unstable();
    let mut out = vec![];
    for &j in &sorted {
        let m = &qs.matrices[j];
        out.push(m.cols() as u64);
        let p = pivot_rows(m);
        out.push(p.len() as u64);
        out.extend(p);
    }
    if sorted.len() > 1 {
        let mut joint = qs.matrices[sorted[0]].clone();
        for &j in &sorted[1..] {
            joint = joint.hconcat(&qs.matrices[j]).expect("equal row counts");
        }
        let p = pivot_rows(&joint);
        out.push(p.len() as u64);
        out.extend(p);
    }
    out
}

/// Per-trial rng derived from (master seed, theta, trial) so results are
/// reproducible regardless of parallelism or trial order.
fn trial_rng(seed: u64, theta: usize, trial: usize) -> ChaCha12Rng {
    let mut s = seed;
    s = s
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(theta as u64 + 1);
    s = s
        .wrapping_mul(0xBF58_476D_1CE4_E5B9)
        .wrapping_add(trial as u64 + 1);
    ChaCha12Rng::seed_from_u64(s)
}

/// Sampled privacy check: empirical coalition-view distributions per theta,
/// compared by total-variation distance against the documented heuristic
/// threshold 4*sqrt(S/trials) with S the observed support size.
pub fn privacy_statistical(
    config: SchemeConfig,
    q: u64,
    coalition: &[usize],
    trials: usize,
    seed: u64,
) -> Result<PrivacyReport> {
    privacy_statistical_inner(config, q, coalition, trials, seed, false)
}

/// Negative control: same test, but the desired record is sent unmixed
/// (identity instead of a uniform invertible matrix). A working test
/// harness must reject this variant.
pub fn privacy_statistical_broken(
    config: SchemeConfig,
    q: u64,
    coalition: &[usize],
    trials: usize,
    seed: u64,
) -> Result<PrivacyReport> {
    privacy_statistical_inner(config, q, coalition, trials, seed, true)
}

fn privacy_statistical_inner(
    config: SchemeConfig,
    q: u64,
    coalition: &[usize],
    trials: usize,
    seed: u64,
    skip_mixing: bool,
) -> Result<PrivacyReport> {
    let mut reports =
        privacy_statistical_suite(config, q, &[coalition.to_vec()], trials, seed, skip_mixing)?;
    Ok(reports.pop().expect("one coalition in, one report out"))
}

/// Run the statistical test for several coalitions on a shared sample
/// stream: each (theta, trial) query set is generated once and observed
/// through every coalition. Sampling is identical to the single-coalition
/// path, so results replay from the same seed.
pub fn privacy_statistical_suite(
    config: SchemeConfig,
    q: u64,
    coalitions: &[Vec<usize>],
    trials: usize,
    seed: u64,
    skip_mixing: bool,
) -> Result<Vec<PrivacyReport>> {
    if trials < 1000 {
        return Err(Error::InvalidConfig("need at least 1000 trials".into()));
    }
    config.validate()?;
    for coalition in coalitions {
        validate_coalition(&config, coalition)?;
    }
    let params = derive_params(config)?;
    let field = PrimeField::new(q)?;
    params.check_field(q)?;
    let schedule = build_schedule(&params)?;
    let m = config.records;
    let l = params.sub_packetization;

    // dists[coalition][theta]
    let mut dists: Vec<Vec<HashMap<Vec<u64>, u64>>> =
        vec![vec![HashMap::new(); m]; coalitions.len()];
    for theta in 0..m {
        for trial in 0..trials {
            let mut rng = trial_rng(seed, theta, trial);
            let mut mix = crate::scheme::sample_mix_state(&params, field, theta, &mut rng)?;
            if skip_mixing {
                mix.s_theta = FieldMatrix::identity(field, l);
            }
            let qs = queries_from_mix(&schedule, field, mix)?;
            for (c, coalition) in coalitions.iter().enumerate() {
                *dists[c][theta]
                    .entry(canonical_view(&qs, coalition))
                    .or_default() += 1;
            }
        }
    }

    let mut reports = vec![];
    for (c, coalition) in coalitions.iter().enumerate() {
        let (num, support) = max_pairwise_tv_counts(&dists[c]);
        let distance = num as f64 / (2.0 * trials as f64);
        let threshold = 4.0 * (support as f64 / trials as f64).sqrt();
        reports.push(PrivacyReport {
            config,
            q,
            coalition: coalition.clone(),
            mode: PrivacyMode::Statistical { trials, seed },
            samples_per_theta: trials,
            support,
            distance,
            exact_zero: num == 0,
            threshold,
            pass: distance <= threshold,
        });
    }
    Ok(reports)
}

/// Exhaustive MDS audit of one config's code set.
#[derive(Debug, Clone)]
pub struct MdsCheck {
    /// per code: (k, length, dimension, column subsets tested)
    pub codes: Vec<(usize, usize, usize, usize)>,
    pub pass: bool,
}

/// For every code the scheme instantiates at this config, check that each
/// dimension-sized column subset of the generator recovers every basis
/// codeword exactly (which also certifies the submatrix is invertible).
pub fn check_mds(config: SchemeConfig, q: u64) -> Result<MdsCheck> {
    let params = derive_params(config)?;
    let field = PrimeField::new(q)?;
    params.check_field(q)?;
    let mut codes = vec![];
    let mut pass = true;
    for k in 1..config.records {
        let dim = params.sum_count(k);
        let len = dim + params.sum_count(k + 1);
        let subsets = subsets_of_size(len, dim);
        if subsets.len() as u128 > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLargeForExhaustive {
                size: subsets.len() as u128,
            });
        }
        let code = crate::mds::SystematicMdsCode::new(len, dim, field)?;
        let mut basis_words = vec![];
        for i in 0..dim {
            let mut info = vec![0u64; dim];
            info[i] = 1;
            basis_words.push(code.encode(&info)?);
        }
        for positions in &subsets {
            for word in &basis_words {
                let values: Vec<u64> = positions.iter().map(|&p| word[p]).collect();
                match code.erasure_decode(positions, &values) {
                    Ok(recovered) => pass &= &recovered == word,
                    Err(_) => pass = false,
                }
            }
        }
        codes.push((k, len, dim, subsets.len()));
    }
    Ok(MdsCheck { codes, pass })
}

/// L / D as an exact rational; equals the capacity for every valid config.
pub fn measure_rate(params: &SchemeParams, schedule: &Schedule) -> Ratio<u128> {
    Ratio::new(
        params.sub_packetization as u128,
        schedule.slots.len() as u128,
    )
}

/// Convenience wrapper: run `count` seeded rank audits for a config.
pub fn audit_ranks_many(config: SchemeConfig, q: u64, count: usize, seed: u64) -> Result<bool> {
    let params = derive_params(config)?;
    let field = PrimeField::new(q)?;
    params.check_field(q)?;
    let schedule = build_schedule(&params)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for i in 0..count {
        let theta = i % config.records;
        let qs = generate_queries(&schedule, field, theta, &mut rng)?;
        let audit = audit_ranks(&qs, &params)?;
        if !audit.pass {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{capacity, default_grid};

    #[test]
    fn rank_audit_expected_values() {
        for ((n, t, m), expect) in [
            ((3, 2, 3), (9, 6, 10)),
            ((3, 2, 2), (3, 2, 2)),
            ((2, 1, 2), (2, 1, 1)),
        ] {
            let config = SchemeConfig::new(n, t, m).unwrap();
            let params = derive_params(config).unwrap();
            let field = PrimeField::new(params.q_min).unwrap();
            let schedule = build_schedule(&params).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(99);
            let qs = generate_queries(&schedule, field, 0, &mut rng).unwrap();
            let audit = audit_ranks(&qs, &params).unwrap();
            assert!(audit.pass, "({n},{t},{m})");
            assert_eq!(audit.expected_full, expect.0);
            assert_eq!(audit.expected_desired, expect.1);
            assert_eq!(audit.expected_undesired, expect.2);
        }
    }

    #[test]
    fn exhaustive_privacy_smallest_instance() {
        let config = SchemeConfig::new(2, 1, 2).unwrap();
        for coalition in [vec![0usize], vec![1usize]] {
            let report = privacy_exhaustive(config, 2, &coalition).unwrap();
            assert_eq!(report.samples_per_theta, 18); // |GL(2,2)| * 3
            assert!(report.exact_zero);
            assert!(report.pass);
            assert_eq!(report.distance, 0.0);
        }
        // empty coalition: no observation, trivially zero distance
        let report = privacy_exhaustive(config, 2, &[]).unwrap();
        assert!(report.exact_zero);
    }

    #[test]
    fn exhaustive_rejects_large_space() {
        let config = SchemeConfig::new(3, 2, 3).unwrap();
        assert!(matches!(
            privacy_exhaustive(config, 7, &[0]),
            Err(Error::TooLargeForExhaustive { .. })
        ));
    }

    #[test]
    fn statistical_privacy_passes_and_control_fails() {
        let config = SchemeConfig::new(3, 2, 2).unwrap();
        let report = privacy_statistical(config, 3, &[0, 2], 2000, 7).unwrap();
        assert!(report.pass, "{}", report.render_text());
        let broken = privacy_statistical_broken(config, 3, &[0, 2], 2000, 7).unwrap();
        assert!(!broken.pass, "{}", broken.render_text());
    }

    #[test]
    fn tv_distance_shrinks_with_more_trials() {
        let config = SchemeConfig::new(3, 2, 2).unwrap();
        let mean_tv = |trials: usize| -> f64 {
            let mut sum = 0.0;
            for seed in [11u64, 22, 33] {
                sum += privacy_statistical(config, 3, &[0], trials, seed)
                    .unwrap()
                    .distance;
            }
            sum / 3.0
        };
        assert!(mean_tv(4000) <= mean_tv(1000));
    }

    #[test]
    fn statistical_trials_floor() {
        let config = SchemeConfig::new(3, 2, 2).unwrap();
        assert!(privacy_statistical(config, 3, &[0], 10, 0).is_err());
    }

    #[test]
    fn rate_equals_capacity_on_grid() {
        for config in default_grid() {
            let params = derive_params(config).unwrap();
            let schedule = build_schedule(&params).unwrap();
            assert_eq!(measure_rate(&params, &schedule), capacity(config).unwrap());
        }
    }

    #[test]
    fn mds_checks_pass_on_grid() {
        for config in default_grid() {
            let params = derive_params(config).unwrap();
            let check = check_mds(config, params.q_min).unwrap();
            assert!(check.pass, "({:?})", config);
            assert_eq!(check.codes.len(), config.records - 1);
        }
    }

    #[test]
    fn rank_audits_pass_on_grid() {
        for config in default_grid() {
            let params = derive_params(config).unwrap();
            assert!(audit_ranks_many(config, params.q_min, 6, 1234).unwrap());
        }
    }
}


