//! Derivation of every integer parameter of the scheme from (N, T, M).
//!
//! The per-order counts alpha_k / beta_k come from the integer recursion
//!   T*alpha_{k+1} = (N-T)*beta_k,   alpha_k + alpha_{k+1} = beta_k + beta_{k+1}
//! seeded at alpha_1 = t^(M-2), beta_1 = 0 when N >= 2T, and at
//! alpha_M = 0, beta_M = (n-t)^(M-2) when T < N < 2T. The closed forms are
//! used only as a cross-check where their exponents are non-negative.

use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::field::next_prime;

/// The model parameters: N servers, collusion threshold T, M records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeConfig {
    pub servers: usize,
    pub collusion: usize,
    pub records: usize,
}

impl SchemeConfig {
    pub fn new(servers: usize, collusion: usize, records: usize) -> Result<Self> {
        let c = SchemeConfig {
            servers,
            collusion,
            records,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 records, got M = {}",
                self.records
            )));
        }
        if self.collusion < 1 || self.collusion >= self.servers {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= T < N, got T = {}, N = {}",
                self.collusion, self.servers
            )));
        }
        Ok(())
    }
}

/// All derived integers of the construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeParams {
    pub config: SchemeConfig,
    /// gcd(N, T)
    pub d: usize,
    /// N / d
    pub n: usize,
    /// T / d
    pub t: usize,
    /// alpha[k-1] = number of k-sums per type at each of the first T servers
    pub alpha: Vec<usize>,
    /// beta[k-1] = number of k-sums per type at each of the last N-T servers
    pub beta: Vec<usize>,
    /// sub-packetization, d * n^(M-1)
    pub sub_packetization: usize,
    /// download cost in symbols per stripe
    pub download: usize,
    /// mixing width per undesired record, T * n^(M-2)
    pub mixing_width: usize,
    /// answer symbols per server in the first group [1..T]
    pub gamma_a: usize,
    /// answer symbols per server in the second group [T+1..N]
    pub gamma_b: usize,
    /// smallest usable prime field size
    pub q_min: u64,
}

impl SchemeParams {
    /// Number of answer symbols downloaded from server `j` (0-based).
    pub fn gamma(&self, j: usize) -> usize {
        if j < self.config.collusion {
            self.gamma_a
        } else {
            self.gamma_b
        }
    }

    /// Codeword dimension for k-sums: T*alpha_k + (N-T)*beta_k (1-based k).
    pub fn sum_count(&self, k: usize) -> usize {
        let c = &self.config;
        c.collusion * self.alpha[k - 1] + (c.servers - c.collusion) * self.beta[k - 1]
    }

    /// Validate a user-chosen field size against the scheme's requirements.
    pub fn check_field(&self, q: u64) -> Result<()> {
        if !crate::field::is_prime(q) {
            return Err(Error::InvalidConfig(format!("q = {q} is not prime")));
        }
        if q < self.q_min {
            return Err(Error::FieldTooSmall {
                q,
                needed: self.q_min,
            });
        }
        Ok(())
    }
}

fn pow(base: usize, exp: usize) -> usize {
    base.pow(exp as u32)
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

pub fn derive_params(config: SchemeConfig) -> Result<SchemeParams> {
    config.validate()?;
    let big_n = config.servers;
    let big_t = config.collusion;
    let m = config.records;
    let d = big_n.gcd(&big_t);
    let n = big_n / d;
    let t = big_t / d;

    let mut alpha = vec![0usize; m];
    let mut beta = vec![0usize; m];
    if big_n >= 2 * big_t {
        alpha[0] = pow(t, m - 2);
        beta[0] = 0;
        for k in 0..m - 1 {
            let num = (big_n - big_t) * beta[k];
            if num % big_t != 0 {
                return Err(Error::Internal("non-integral alpha in recursion".into()));
            }
            alpha[k + 1] = num / big_t;
            let lhs = alpha[k] + alpha[k + 1];
            if lhs < beta[k] {
                return Err(Error::Internal("negative beta in recursion".into()));
            }
            beta[k + 1] = lhs - beta[k];
        }
    } else {
        alpha[m - 1] = 0;
        beta[m - 1] = pow(n - t, m - 2);
        for k in (0..m - 1).rev() {
            let num = big_t * alpha[k + 1];
            if num % (big_n - big_t) != 0 {
                return Err(Error::Internal("non-integral beta in recursion".into()));
            }
            beta[k] = num / (big_n - big_t);
            let lhs = beta[k] + beta[k + 1];
            if lhs < alpha[k + 1] {
                return Err(Error::Internal("negative alpha in recursion".into()));
            }
            alpha[k] = lhs - alpha[k + 1];
        }
    }

    cross_check(config, d, n, t, &alpha, &beta)?;

    let sum_count =
        |k: usize| big_t * alpha[k - 1] + (big_n - big_t) * beta[k - 1];
    let sub_packetization: usize = (1..=m).map(|k| binom(m - 1, k - 1) * sum_count(k)).sum();
    let download: usize = (1..=m).map(|k| binom(m, k) * sum_count(k)).sum();
    if sub_packetization != d * pow(n, m - 1) {
        return Err(Error::Internal("sub-packetization mismatch".into()));
    }
    let mixing_width = big_t * pow(n, m - 2);
    let gamma_a: usize = (1..=m).map(|k| binom(m, k) * alpha[k - 1]).sum();
    let gamma_b: usize = (1..=m).map(|k| binom(m, k) * beta[k - 1]).sum();
    if big_t * gamma_a + (big_n - big_t) * gamma_b != download {
        return Err(Error::Internal("download accounting mismatch".into()));
    }
    let bound = (big_n * pow(t, m - 2).max(pow(n - t, m - 2))) as u64;
    let q_min = next_prime(bound.max(2));

    Ok(SchemeParams {
        config,
        d,
        n,
        t,
        alpha,
        beta,
        sub_packetization,
        download,
        mixing_width,
        gamma_a,
        gamma_b,
        q_min,
    })
}

/// Verify the recursion output against the closed-form solutions and the
/// product identity T*alpha_k + (N-T)*beta_k = d*(n-t)^(k-1)*t^(M-k).
fn cross_check(
    config: SchemeConfig,
    d: usize,
    n: usize,
    t: usize,
    alpha: &[usize],
    beta: &[usize],
) -> Result<()> {
    let big_n = config.servers as i128;
    let big_t = config.collusion as i128;
    let m = config.records;
    let (ni, ti) = (n as i128, t as i128);
    let spow = |b: i128, e: usize| -> i128 { b.pow(e as u32) };

    for k in 1..=m {
        let expect = d as i128 * spow(ni - ti, k - 1) * spow(ti, m - k);
        let got = big_t * alpha[k - 1] as i128 + (big_n - big_t) * beta[k - 1] as i128;
        if got != expect {
            return Err(Error::Internal(format!("product identity fails at k = {k}")));
        }
        if config.servers >= 2 * config.collusion {
            if k >= 2 {
                let num = (spow(ni - ti, k - 2) - spow(-ti, k - 2)) * (ni - ti) * spow(ti, m - k);
                if num % ni != 0 || num / ni != alpha[k - 1] as i128 {
                    return Err(Error::Internal(format!("closed form alpha fails at k = {k}")));
                }
            }
            let num = (spow(ni - ti, k - 1) - spow(-ti, k - 1)) * spow(ti, m - k);
            if num % ni != 0 || num / ni != beta[k - 1] as i128 {
                return Err(Error::Internal(format!("closed form beta fails at k = {k}")));
            }
        } else {
            let num = (spow(ti, m - k) - spow(ti - ni, m - k)) * spow(ni - ti, k - 1);
            if num % ni != 0 || num / ni != alpha[k - 1] as i128 {
                return Err(Error::Internal(format!("closed form alpha fails at k = {k}")));
            }
            if k <= m - 1 {
                let num =
                    (spow(ti, m - k - 1) - spow(ti - ni, m - k - 1)) * ti * spow(ni - ti, k - 1);
                if num % ni != 0 || num / ni != beta[k - 1] as i128 {
                    return Err(Error::Internal(format!("closed form beta fails at k = {k}")));
                }
            }
        }
    }
    Ok(())
}

/// The exact capacity 1 / (1 + T/N + ... + (T/N)^(M-1)), in lowest terms.
pub fn capacity(config: SchemeConfig) -> Result<Ratio<u128>> {
    config.validate_capacity()?;
    let n = config.servers as u128;
    let t = config.collusion as u128;
    let m = config.records as u32;
    // 1 / sum_{i<M} (T/N)^i = N^(M-1) (N - T) / (N^M - T^M)
    Ok(Ratio::new(n.pow(m - 1) * (n - t), n.pow(m) - t.pow(m)))
}

impl SchemeConfig {
    // capacity is defined for M >= 1; the scheme itself needs M >= 2.
    fn validate_capacity(&self) -> Result<()> {
        if self.records < 1 {
            return Err(Error::InvalidConfig("need M >= 1".into()));
        }
        if self.collusion < 1 || self.collusion >= self.servers {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= T < N, got T = {}, N = {}",
                self.collusion, self.servers
            )));
        }
        Ok(())
    }
}

/// d * n^(M-1): the optimal sub-packetization for the configuration.
pub fn optimal_subpacketization(config: SchemeConfig) -> Result<usize> {
    config.validate()?;
    let d = config.servers.gcd(&config.collusion);
    let n = config.servers / d;
    Ok(d * pow(n, config.records - 1))
}

/// One row of the comparison against the baseline scheme with
/// sub-packetization N^M.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub config: SchemeConfig,
    pub sub_packetization: usize,
    pub download: usize,
    pub rate: Ratio<u128>,
    pub q_min: u64,
    pub baseline_sub_packetization: u128,
    pub baseline_q_bound: u128,
    pub sub_packetization_ratio: Ratio<u128>,
}

pub fn comparison_table(configs: &[SchemeConfig]) -> Result<Vec<ComparisonRow>> {
    configs
        .iter()
        .map(|&config| {
            let p = derive_params(config)?;
            let n = config.servers as u128;
            let t = config.collusion as u128;
            let m = config.records as u32;
            let baseline_q_bound =
                (n * n * t.pow(m - 2)).max(n * n * (n - t).pow(m - 2));
            Ok(ComparisonRow {
                config,
                sub_packetization: p.sub_packetization,
                download: p.download,
                rate: Ratio::new(p.sub_packetization as u128, p.download as u128),
                q_min: p.q_min,
                baseline_sub_packetization: n.pow(m),
                baseline_q_bound,
                sub_packetization_ratio: Ratio::new(p.sub_packetization as u128, n.pow(m)),
            })
        })
        .collect()
}

/// Aligned human-readable table.
pub fn render_table(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>3} {:>3} {:>3} {:>8} {:>8} {:>10} {:>7} {:>10} {:>10} {:>9}\n",
        "N", "T", "M", "L", "D", "rate", "q_min", "L_base", "q_base", "L/L_base"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:>3} {:>3} {:>3} {:>8} {:>8} {:>10} {:>7} {:>10} {:>10} {:>9}\n",
            r.config.servers,
            r.config.collusion,
            r.config.records,
            r.sub_packetization,
            r.download,
            r.rate.to_string(),
            r.q_min,
            r.baseline_sub_packetization,
            r.baseline_q_bound,
            r.sub_packetization_ratio.to_string(),
        ));
    }
    out
}

/// Line-oriented machine format. Header line first, then one CSV row
/// per config: N,T,M,L,D,rate,q_min,L_base,q_base,L_ratio.
pub fn render_machine(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("N,T,M,L,D,rate,q_min,L_base,q_base,L_ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.config.servers,
            r.config.collusion,
            r.config.records,
            r.sub_packetization,
            r.download,
            r.rate,
            r.q_min,
            r.baseline_sub_packetization,
            r.baseline_q_bound,
            r.sub_packetization_ratio,
        ));
    }
    out
}

/// The configurations exercised throughout the verification suites: both
/// branches of the recursion, d > 1, and d = 1 all occur.
pub fn default_grid() -> Vec<SchemeConfig> {
    [
        (2, 1, 2),
        (3, 2, 2),
        (3, 2, 3),
        (4, 2, 3),
        (5, 3, 3),
        (4, 3, 2),
        (2, 1, 4),
    ]
    .into_iter()
    .map(|(n, t, m)| SchemeConfig {
        servers: n,
        collusion: t,
        records: m,
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, t: usize, m: usize) -> SchemeConfig {
        SchemeConfig::new(n, t, m).unwrap()
    }

    #[test]
    fn worked_configs() {
        let p = derive_params(cfg(3, 2, 2)).unwrap();
        assert_eq!(p.alpha, vec![1, 0]);
        assert_eq!(p.beta, vec![0, 1]);
        assert_eq!(p.sub_packetization, 3);
        assert_eq!(p.download, 5);
        assert_eq!(p.mixing_width, 2);
        assert_eq!(p.gamma_a, 2);
        assert_eq!(p.gamma_b, 1);

        let p = derive_params(cfg(3, 2, 3)).unwrap();
        assert_eq!(p.alpha, vec![1, 1, 0]);
        assert_eq!(p.beta, vec![2, 0, 1]);
        assert_eq!(p.sub_packetization, 9);
        assert_eq!(p.download, 19);
        assert_eq!(p.mixing_width, 6);
        assert_eq!(p.q_min, 7);

        let p = derive_params(cfg(2, 1, 2)).unwrap();
        assert_eq!(p.alpha, vec![1, 0]);
        assert_eq!(p.beta, vec![0, 1]);
        assert_eq!(p.sub_packetization, 2);
        assert_eq!(p.download, 3);
        assert_eq!(p.mixing_width, 1);
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(cfg(3, 2, 2)).unwrap(), Ratio::new(3u128, 5));
        assert_eq!(capacity(cfg(3, 2, 3)).unwrap(), Ratio::new(9u128, 19));
        let one_record = SchemeConfig {
            servers: 4,
            collusion: 2,
            records: 1,
        };
        assert_eq!(capacity(one_record).unwrap(), Ratio::new(1u128, 1));
    }

    #[test]
    fn optimal_subpacketization_examples() {
        assert_eq!(optimal_subpacketization(cfg(3, 2, 2)).unwrap(), 3);
        assert_eq!(optimal_subpacketization(cfg(3, 2, 3)).unwrap(), 9);
        assert_eq!(optimal_subpacketization(cfg(4, 2, 3)).unwrap(), 8);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SchemeConfig::new(2, 2, 2).is_err());
        assert!(SchemeConfig::new(3, 0, 2).is_err());
        assert!(SchemeConfig::new(3, 2, 1).is_err());
        assert!(SchemeConfig::new(3, 4, 2).is_err());
    }

    /// Sweep: recursion output satisfies both defining equations exactly,
    /// L matches the closed form, and L/D equals the capacity as exact
    /// rationals, for every valid config with N <= 12, M <= 6.
    #[test]
    fn recursion_sweep() {
        for servers in 2..=12 {
            for collusion in 1..servers {
                for records in 2..=6 {
                    let c = cfg(servers, collusion, records);
                    let p = derive_params(c).unwrap();
                    let nt = servers - collusion;
                    for k in 0..records - 1 {
                        assert_eq!(collusion * p.alpha[k + 1], nt * p.beta[k]);
                        assert_eq!(
                            p.alpha[k] + p.alpha[k + 1],
                            p.beta[k] + p.beta[k + 1]
                        );
                    }
                    assert_eq!(p.sub_packetization, optimal_subpacketization(c).unwrap());
                    assert_eq!(
                        Ratio::new(p.sub_packetization as u128, p.download as u128),
                        capacity(c).unwrap()
                    );
                    // counting undesired coordinates per record also gives L
                    let m = records;
                    let l2: usize = (1..m)
                        .map(|k| {
                            binom(m - 2, k - 1)
                                * (collusion * (p.alpha[k - 1] + p.alpha[k])
                                    + nt * (p.beta[k - 1] + p.beta[k]))
                        })
                        .sum();
                    assert_eq!(l2, p.sub_packetization);
                }
            }
        }
    }

    #[test]
    fn coprimality_of_rate_terms() {
        use num_integer::Integer;
        for (n, t) in [(3usize, 2usize), (5, 2), (7, 3), (4, 1), (9, 4)] {
            assert_eq!(n.gcd(&t), 1);
            for m in 2..=6u32 {
                let num = (n as u128).pow(m - 1);
                let den: u128 = (0..m)
                    .map(|i| (n as u128).pow(m - 1 - i) * (t as u128).pow(i))
                    .sum();
                assert_eq!(num.gcd(&den), 1);
            }
        }
    }

    #[test]
    fn comparison_rows() {
        let rows = comparison_table(&[cfg(3, 2, 3), cfg(2, 1, 2)]).unwrap();
        assert_eq!(rows[0].sub_packetization, 9);
        assert_eq!(rows[0].baseline_sub_packetization, 27);
        assert_eq!(rows[0].sub_packetization_ratio, Ratio::new(1u128, 3));
        // max{N^2 T^(M-2), N^2 (N-T)^(M-2)} = max{18, 9}
        assert_eq!(rows[0].baseline_q_bound, 18);
        // our raw bound is max{N t^(M-2), N (n-t)^(M-2)} = 6, smaller by
        // exactly the factor N d^(M-2) = 3
        assert_eq!(6 * 3, rows[0].baseline_q_bound);
        assert_eq!(rows[0].q_min, 7);
        assert_eq!(rows[1].q_min, 2);
        assert_eq!(rows[1].baseline_q_bound, 4);
        let text = render_table(&rows);
        assert!(text.contains("9/19"));
        let machine = render_machine(&rows);
        assert!(machine.starts_with("N,T,M,"));
        assert_eq!(machine.lines().count(), 3);
    }

    #[test]
    fn q_override_validation() {
        let p = derive_params(cfg(3, 2, 3)).unwrap();
        assert!(p.check_field(7).is_ok());
        assert!(p.check_field(11).is_ok());
        assert!(matches!(p.check_field(5), Err(Error::FieldTooSmall { .. })));
        assert!(p.check_field(9).is_err());
    }
}
