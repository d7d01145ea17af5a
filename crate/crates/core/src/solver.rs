//! Ground-state search for [`QuboProblem`]s: exhaustive enumeration and
//! restart-based simulated annealing.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand::rngs::SmallRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qubo::{BitCode, DenseQubo, QuboProblem};

pub const DEFAULT_EXACT_CAP: usize = 24;

/// Number of low bits enumerated incrementally between exact energy
/// recomputations.
const INNER_BITS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub code: BitCode,
    pub energy: f64,
}

impl Solution {
    /// Lower energy wins; equal energies go to the smaller integer code.
    fn better_than(&self, other: &Solution) -> bool {
        match self.energy.partial_cmp(&other.energy) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => self.code.value_cmp(&other.code) == Ordering::Less,
            _ => false,
        }
    }
}

/// Splitmix64 finaliser over `(seed, index)`, used to derive independent
/// stream seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSolver {
    pub cap: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver {
            cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl ExactSolver {
    /// Enumerate all `2^n` codes in blocked Gray-code order. Within a block
    /// of `2^INNER_BITS` codes the energy is updated by single-flip deltas;
    /// each block starts from an exact evaluation so rounding drift stays
    /// bounded.
    pub fn solve(&self, problem: &QuboProblem) -> Result<Solution> {
        let n = problem.n_vars();
        if n > self.cap || n >= 64 {
            return Err(Error::SolverCap {
                n_vars: n,
                cap: self.cap.min(63),
            });
        }
        let dense = problem.dense();
        let inner = n.min(INNER_BITS);
        let outer = n - inner;

        let mut bits = vec![false; n];
        let mut fields = vec![0.0; n];
        let mut best_energy = f64::INFINITY;
        let mut best_value = u64::MAX;

        for g in 0..(1u64 << outer) {
            let high = g ^ (g >> 1);
            for (k, b) in bits.iter_mut().enumerate() {
                *b = k >= inner && (high >> (k - inner)) & 1 == 1;
            }
            let mut energy = dense.energy_and_fields(&bits, &mut fields);
            let mut value = high << inner;
            if energy < best_energy || (energy == best_energy && value < best_value) {
                best_energy = energy;
                best_value = value;
            }
            for t in 1..(1u64 << inner) {
                let i = t.trailing_zeros() as usize;
                let (delta, sign) = if bits[i] {
                    (-fields[i], -1.0)
                } else {
                    (fields[i], 1.0)
                };
                energy += delta;
                bits[i] = !bits[i];
                value ^= 1 << i;
                for (f, c) in fields.iter_mut().zip(dense.row(i)) {
                    *f += sign * c;
                }
                if energy < best_energy || (energy == best_energy && value < best_value) {
                    best_energy = energy;
                    best_value = value;
                }
            }
        }

        let code = BitCode::from_index(best_value, n);
        let energy = problem.energy(&code)?;
        Ok(Solution { code, energy })
    }
}

/// Inverse-temperature range for the geometric annealing schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaRange {
    /// `hot = 1/max|c|`, `cold = 1000·hot`.
    CoefficientScaled,
    /// Derived from single-flip energy scales, see [`adaptive_beta_range`].
    Adaptive,
    Fixed { hot: f64, cold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaParams {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta: BetaRange,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            num_reads: 150,
            sweeps: 1000,
            beta: BetaRange::CoefficientScaled,
            seed: 0,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::invalid("num_reads must be >= 1"));
        }
        if self.sweeps == 0 {
            return Err(Error::invalid("sweeps must be >= 1"));
        }
        if let BetaRange::Fixed { hot, cold } = self.beta {
            if !(hot > 0.0 && hot <= cold && cold.is_finite()) {
                return Err(Error::invalid("beta range must satisfy 0 < hot <= cold"));
            }
        }
        Ok(())
    }

    /// Resolved `(hot, cold)` pair for `problem`.
    pub fn beta_range(&self, problem: &QuboProblem) -> (f64, f64) {
        match self.beta {
            BetaRange::Fixed { hot, cold } => (hot, cold),
            BetaRange::CoefficientScaled => {
                let m = problem.max_abs_coefficient();
                if m == 0.0 {
                    (1.0, 1.0)
                } else {
                    (1.0 / m, 1000.0 / m)
                }
            }
            BetaRange::Adaptive => adaptive_beta_range(problem),
        }
    }

    pub fn schedule(&self, problem: &QuboProblem) -> Vec<f64> {
        let (hot, cold) = self.beta_range(problem);
        geometric_schedule(hot, cold, self.sweeps)
    }
}

/// Hot end: the largest single-flip energy change is accepted with
/// probability 1/2. Cold end: the smallest nonzero coefficient costs a
/// factor 100 in acceptance.
pub fn adaptive_beta_range(problem: &QuboProblem) -> (f64, f64) {
    let n = problem.n_vars();
    let mut max_delta = vec![0.0_f64; n];
    for (i, c) in problem.linear().iter().enumerate() {
        max_delta[i] += c.abs();
    }
    let mut min_abs = f64::INFINITY;
    for (&(i, j), c) in problem.quadratic() {
        max_delta[i] += c.abs();
        max_delta[j] += c.abs();
        if *c != 0.0 {
            min_abs = min_abs.min(c.abs());
        }
    }
    for c in problem.linear() {
        if *c != 0.0 {
            min_abs = min_abs.min(c.abs());
        }
    }
    let max_delta = max_delta.into_iter().fold(0.0_f64, f64::max);
    if max_delta == 0.0 || !min_abs.is_finite() {
        return (1.0, 1.0);
    }
    let hot = std::f64::consts::LN_2 / max_delta;
    let cold = (100.0_f64.ln() / min_abs).max(hot);
    (hot, cold)
}

pub fn geometric_schedule(hot: f64, cold: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![cold];
    }
    let ratio = (cold / hot).ln() / (sweeps - 1) as f64;
    (0..sweeps)
        .map(|s| hot * (ratio * s as f64).exp())
        .collect()
}

/// Simulated annealing with independent restarts. Read `r` uses the stream
/// seeded by `derive_seed(seed, r)`, so the result does not depend on how
/// reads are scheduled across threads.
pub fn solve_sa(problem: &QuboProblem, params: &SaParams) -> Result<Solution> {
    params.validate()?;
    let dense = problem.dense();
    let schedule = params.schedule(problem);
    let reads: Vec<Solution> = (0..params.num_reads as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = SmallRng::seed_from_u64(derive_seed(params.seed, r));
            let bits = anneal_once(&dense, &schedule, &mut rng);
            let code = BitCode::from_bits(bits);
            let energy = problem.energy(&code).expect("length checked");
            Solution { code, energy }
        })
        .collect();
    Ok(reads
        .into_iter()
        .reduce(|best, s| if s.better_than(&best) { s } else { best })
        .expect("num_reads >= 1"))
}

/// Uphill moves costing more than this many units of `1/beta` are
/// rejected without drawing (acceptance below 1e-16).
const MAX_EXPONENT: f64 = 37.0;

/// One Metropolis read from a random start; returns the lowest-energy state
/// visited.
fn anneal_once<R: Rng>(dense: &DenseQubo, schedule: &[f64], rng: &mut R) -> Vec<bool> {
    let n = dense.n;
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut fields = vec![0.0; n];
    let mut energy = dense.energy_and_fields(&bits, &mut fields);
    let mut best = bits.clone();
    let mut best_energy = energy;

    for &beta in schedule {
        for i in 0..n {
            let delta = if bits[i] { -fields[i] } else { fields[i] };
            if delta > 0.0 {
                let x = beta * delta;
                if x > MAX_EXPONENT || rng.random::<f64>() >= (-x).exp() {
                    continue;
                }
            }
            let sign = if bits[i] { -1.0 } else { 1.0 };
            bits[i] = !bits[i];
            energy += delta;
            for (f, c) in fields.iter_mut().zip(dense.row(i)) {
                *f += sign * c;
            }
            if energy < best_energy {
                best_energy = energy;
                best.copy_from_slice(&bits);
            }
        }
    }
    best
}

/// Solver handle shared by the encoder, trainer, and benchmarks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solver {
    Exact(ExactSolver),
    Anneal(SaParams),
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Exact(ExactSolver::default())
    }
}

impl Solver {
    pub fn exact() -> Self {
        Solver::Exact(ExactSolver::default())
    }

    pub fn anneal(params: SaParams) -> Self {
        Solver::Anneal(params)
    }

    pub fn solve(&self, problem: &QuboProblem) -> Result<Solution> {
        match self {
            Solver::Exact(s) => s.solve(problem),
            Solver::Anneal(p) => solve_sa(problem, p),
        }
    }

    /// Same solver with its random stream re-keyed; exact solvers are
    /// returned unchanged.
    pub fn reseeded(&self, seed: u64) -> Solver {
        match *self {
            Solver::Exact(s) => Solver::Exact(s),
            Solver::Anneal(p) => Solver::Anneal(SaParams { seed, ..p }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Solver::Exact(_) => Ok(()),
            Solver::Anneal(p) => p.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_problem(n: usize, seed: u64) -> QuboProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let linear = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut quadratic = BTreeMap::new();
        for i in 0..n {
            for j in (i + 1)..n {
                quadratic.insert((i, j), rng.random_range(-1.0..1.0));
            }
        }
        QuboProblem::new(linear, quadratic, rng.random_range(-1.0..1.0)).unwrap()
    }

    fn naive_argmin(problem: &QuboProblem) -> Solution {
        let n = problem.n_vars();
        let mut best = Solution {
            code: BitCode::zeros(n),
            energy: problem.energy(&BitCode::zeros(n)).unwrap(),
        };
        for v in 1..(1u64 << n) {
            let code = BitCode::from_index(v, n);
            let energy = problem.energy(&code).unwrap();
            if energy < best.energy {
                best = Solution { code, energy };
            }
        }
        best
    }

    fn two_var(linear: [f64; 2], coupling: Option<f64>, offset: f64) -> QuboProblem {
        let quadratic = coupling.into_iter().map(|c| ((0, 1), c)).collect();
        QuboProblem::new(linear.to_vec(), quadratic, offset).unwrap()
    }

    #[test]
    fn exact_small_examples() {
        let p = two_var([-1.0, 1.0], None, 1.0);
        let s = ExactSolver::default().solve(&p).unwrap();
        assert_eq!(s.code, BitCode::from(vec![true, false]));
        assert_eq!(s.energy, 0.0);

        let p = two_var([-1.0, -2.0], Some(2.0), 2.0);
        let s = ExactSolver::default().solve(&p).unwrap();
        assert_eq!(s.code, BitCode::from(vec![false, true]));
        assert_eq!(s.energy, 0.0);
    }

    #[test]
    fn flat_landscape_picks_zero_code() {
        let p = QuboProblem::new(vec![0.0; 5], BTreeMap::new(), 3.5).unwrap();
        let s = ExactSolver::default().solve(&p).unwrap();
        assert_eq!(s.code, BitCode::zeros(5));
        assert_eq!(s.energy, 3.5);
        let s = solve_sa(&p, &SaParams { num_reads: 4, sweeps: 10, ..Default::default() }).unwrap();
        assert_eq!(s.energy, 3.5);
    }

    #[test]
    fn ties_go_to_lowest_integer_code() {
        let p = QuboProblem::new(vec![-1.0, -1.0, 0.0], BTreeMap::from([((0, 1), 1.0)]), 0.0).unwrap();
        let s = ExactSolver::default().solve(&p).unwrap();
        assert_eq!(s.code, BitCode::from_index(1, 3));
        assert_eq!(s.energy, -1.0);
    }

    #[test]
    fn cap_refusal_names_the_cap() {
        let p = QuboProblem::new(vec![0.0; 6], BTreeMap::new(), 0.0).unwrap();
        let err = ExactSolver { cap: 5 }.solve(&p).unwrap_err();
        assert!(matches!(err, Error::SolverCap { n_vars: 6, cap: 5 }));
        assert!(err.to_string().contains("cap is 5"));
    }

    #[test]
    fn exact_matches_naive_enumeration() {
        for seed in 0..50 {
            let n = 1 + (seed as usize % 12);
            let p = random_problem(n, seed);
            let fast = ExactSolver::default().solve(&p).unwrap();
            let slow = naive_argmin(&p);
            assert_eq!(fast.code, slow.code, "seed {seed}");
            assert!((fast.energy - slow.energy).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_handles_more_than_one_block() {
        let p = random_problem(13, 99);
        assert_eq!(ExactSolver::default().solve(&p).unwrap().code, naive_argmin(&p).code);
    }

    #[test]
    fn sa_two_variable_example() {
        let p = two_var([-1.0, -2.0], Some(2.0), 2.0);
        let s = solve_sa(&p, &SaParams { num_reads: 10, ..Default::default() }).unwrap();
        assert_eq!(s.energy, 0.0);
        assert_eq!(s.code, BitCode::from(vec![false, true]));
    }

    #[test]
    fn sa_matches_exact_on_random_sixteen_variable_problems() {
        let mut hits = 0;
        for seed in 0..100 {
            let p = random_problem(16, 1000 + seed);
            let exact = ExactSolver::default().solve(&p).unwrap();
            let sa = solve_sa(&p, &SaParams { seed, ..Default::default() }).unwrap();
            assert!(sa.energy >= exact.energy - 1e-12);
            if (sa.energy - exact.energy).abs() <= 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "SA matched exact on {hits}/100");
    }

    #[test]
    fn sa_is_deterministic_across_thread_counts() {
        let p = random_problem(14, 5);
        let params = SaParams { num_reads: 16, sweeps: 50, seed: 3, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| solve_sa(&p, &params)).unwrap();
        let b = solve_sa(&p, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedules() {
        let s = geometric_schedule(0.1, 100.0, 4);
        assert_eq!(s.len(), 4);
        assert!((s[0] - 0.1).abs() < 1e-15 && (s[3] - 100.0).abs() < 1e-12);
        assert!((s[1] / s[0] - 10.0).abs() < 1e-9);
        assert_eq!(geometric_schedule(0.1, 100.0, 1), vec![100.0]);
        let p = two_var([-4.0, 1.0], Some(2.0), 0.0);
        assert_eq!(SaParams::default().beta_range(&p), (0.25, 250.0));
        let (hot, cold) = adaptive_beta_range(&p);
        assert!((hot - std::f64::consts::LN_2 / 6.0).abs() < 1e-15);
        assert!((cold - 100.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_sa_params() {
        assert!(SaParams { num_reads: 0, ..Default::default() }.validate().is_err());
        assert!(SaParams { sweeps: 0, ..Default::default() }.validate().is_err());
        let fixed = BetaRange::Fixed { hot: 2.0, cold: 1.0 };
        assert!(SaParams { beta: fixed, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn sa_never_beats_exact(seed in any::<u64>(), n in 1usize..=20) {
            let p = random_problem(n, seed);
            let exact = ExactSolver::default().solve(&p).unwrap();
            let params = SaParams { num_reads: 8, sweeps: 200, seed, ..Default::default() };
            let sa = solve_sa(&p, &params).unwrap();
            prop_assert!(sa.energy >= exact.energy - 1e-12 * (1.0 + exact.energy.abs()));
            prop_assert_eq!(sa.energy, p.energy(&sa.code).unwrap());
        }

        #[test]
        fn more_reads_never_hurt(seed in any::<u64>(), n in 2usize..=16, reads in 1usize..10) {
            let p = random_problem(n, seed);
            let small = SaParams { num_reads: reads, sweeps: 30, seed, ..Default::default() };
            let large = SaParams { num_reads: reads + 5, ..small };
            let a = solve_sa(&p, &small).unwrap();
            let b = solve_sa(&p, &large).unwrap();
            prop_assert!(b.energy <= a.energy);
        }

        #[test]
        fn perturbed_ground_state_is_no_better(seed in any::<u64>(), n in 1usize..=10, noise in 0.0f64..0.5) {
            let p = random_problem(n, seed);
            let ground = ExactSolver::default().solve(&p).unwrap();
            let q = p.perturb(noise, seed).unwrap();
            let moved = ExactSolver::default().solve(&q).unwrap();
            prop_assert!(p.energy(&moved.code).unwrap() >= ground.energy - 1e-12);
        }
    }
}
