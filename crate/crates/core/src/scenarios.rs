//! Named experiments: Bell/CHSH, the PR box, a fine-tuned classical model,
//! and map checks between graphs and distributions.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ccm::{generate_ccm, ClassicalModelParams, Mechanism};
use crate::ci::{closure, CiRelation, CiSet};
use crate::distribution::{JointDistribution, OutcomeSpace};
use crate::error::{Error, Result};
use crate::graph::{causal_input_list, CausalInputList, Dag, DagBuilder, Role};
use crate::quantum::{random_state, random_unitary, CMatrix, Qcm, QuantumModelParams, C64};
use crate::separation::{ci_set_d, ci_set_q};
use crate::varset::{VarId, VarSet};

/// Tsirelson's bound `2 sqrt 2`.
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Outcome of comparing a graph's CI closure with a distribution's CI set.
#[derive(Debug, Clone, PartialEq)]
pub struct MapVerdict {
    pub imap: bool,
    pub perfect: bool,
    /// Smallest relation implied by the graph but absent from the
    /// distribution; failing that, the smallest one present in the
    /// distribution but not implied by the graph.
    pub witness: Option<CiRelation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationRule {
    D,
    Q,
}

/// Compare `closure(ci_set_rule(g))` with `p.all_ci(tol)`. `p` must have
/// the same variable names as `g`, in any order.
pub fn check_map(g: &Dag, p: &JointDistribution, rule: SeparationRule, tol: f64) -> Result<MapVerdict> {
    if p.n() != g.n() {
        return Err(Error::input(format!(
            "graph has {} variables, distribution has {}",
            g.n(),
            p.n()
        )));
    }
    let p = p.align_to(g.names())?;
    let from_graph = match rule {
        SeparationRule::D => ci_set_d(g)?,
        SeparationRule::Q => ci_set_q(g)?,
    };
    let cg = closure(&from_graph)?;
    let cp = p.all_ci(tol)?;
    Ok(verdict(&cg, &cp))
}

fn verdict(cg: &CiSet, cp: &CiSet) -> MapVerdict {
    let missing = cg.difference(cp).next().copied();
    let extra = cp.difference(cg).next().copied();
    MapVerdict {
        imap: missing.is_none(),
        perfect: missing.is_none() && extra.is_none(),
        witness: missing.or(extra),
    }
}

/// Measurement angles for the two settings on each wing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellAngles {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl BellAngles {
    /// Angles reaching `2 sqrt 2` with `E(s,t) = cos 2(a_s - b_t)`.
    pub fn optimal() -> Self {
        BellAngles {
            a: [0.0, FRAC_PI_4],
            b: [FRAC_PI_8, -FRAC_PI_8],
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [a0, a1, b0, b1] => Ok(BellAngles {
                a: [*a0, *a1],
                b: [*b0, *b1],
            }),
            _ => Err(Error::input("Bell scenario needs four angles a0 a1 b0 b1")),
        }
    }
}

/// `[[cos t, sin t], [-sin t, cos t]]`.
pub fn rotation(theta: f64) -> CMatrix {
    let (s, c) = theta.sin_cos();
    CMatrix::from_real(2, 2, &[c, s, -s, c]).expect("2x2")
}

/// The structural Bell graph: `lambda -> A`, `lambda -> B`, `S -> A`,
/// `T -> B`. Variables in the order `lambda, S, T, A, B`.
pub fn bell_dag(lambda_values: usize) -> Dag {
    DagBuilder::new()
        .node("lambda", Role::Setting, lambda_values)
        .node("S", Role::Setting, 2)
        .node("T", Role::Setting, 2)
        .node("A", Role::Outcome, 2)
        .node("B", Role::Outcome, 2)
        .edge(0, 3)
        .edge(0, 4)
        .edge(1, 3)
        .edge(2, 4)
        .build()
        .expect("fixed graph")
}

/// The Bell network with measurement settings on the source's wires:
/// `lambda -> S -> A`, `lambda -> T -> B`, qubit edges.
pub fn bell_network_dag(lambda_values: usize) -> Dag {
    DagBuilder::new()
        .node("lambda", Role::Setting, lambda_values)
        .node("S", Role::Setting, 2)
        .node("T", Role::Setting, 2)
        .node("A", Role::Outcome, 2)
        .node("B", Role::Outcome, 2)
        .edge(0, 1)
        .edge(0, 2)
        .edge(1, 3)
        .edge(2, 4)
        .build()
        .expect("fixed graph")
}

/// The four Bell states `Phi+, Phi-, Psi+, Psi-` on two qubits.
pub fn bell_state(index: usize) -> Vec<C64> {
    let h = FRAC_1_SQRT_2;
    let v: [f64; 4] = match index {
        0 => [h, 0.0, 0.0, h],
        1 => [h, 0.0, 0.0, -h],
        2 => [0.0, h, h, 0.0],
        3 => [0.0, h, -h, 0.0],
        _ => panic!("there are four Bell states"),
    };
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// Bell experiment on [`bell_network_dag`]: a single-valued source in
/// `Phi+`, rotations `R(a_s)` and `R(b_t)`, uniform settings.
pub fn bell_scenario(angles: BellAngles) -> Result<(Qcm, JointDistribution)> {
    bell_mixture_scenario(angles, &[1.0])
}

/// As [`bell_scenario`] with a source variable whose value `j` selects
/// Bell state `j` (at most four values), drawn with `lambda_weights`.
pub fn bell_mixture_scenario(angles: BellAngles, lambda_weights: &[f64]) -> Result<(Qcm, JointDistribution)> {
    let k = lambda_weights.len();
    if !(1..=4).contains(&k) {
        return Err(Error::input("the source selects among at most four Bell states"));
    }
    let g = bell_network_dag(k);
    let mut params = QuantumModelParams::default();
    params.preps.insert(VarId(0), (0..k).map(bell_state).collect());
    params.marginals.insert(VarId(0), lambda_weights.to_vec());
    params
        .gates
        .insert(VarId(1), angles.a.iter().map(|&t| rotation(t)).collect());
    params
        .gates
        .insert(VarId(2), angles.b.iter().map(|&t| rotation(t)).collect());
    let q = Qcm::new(g, params)?;
    let p = q.evaluate()?;
    Ok((q, p))
}

/// CHSH value of a distribution with binary variables named `A`, `B`,
/// `S`, `T`; outcome `a` counts as `(-1)^a`.
pub fn chsh(p: &JointDistribution) -> Result<f64> {
    let id = |name: &str| {
        p.space()
            .id_of(name)
            .ok_or_else(|| Error::input(format!("CHSH needs a variable named {name}")))
    };
    chsh_vars(p, id("A")?, id("B")?, id("S")?, id("T")?)
}

/// `|E(0,0) + E(0,1) + E(1,0) - E(1,1)|` with
/// `E(s,t) = sum (-1)^(a xor b) P(a,b|s,t)`.
pub fn chsh_vars(p: &JointDistribution, a: VarId, b: VarId, s: VarId, t: VarId) -> Result<f64> {
    for v in [a, b, s, t] {
        if v.index() >= p.n() || p.space().sizes()[v.index()] != 2 {
            return Err(Error::input("CHSH needs four distinct binary variables"));
        }
    }
    let vars = VarSet::of(&[a.index(), b.index(), s.index(), t.index()]);
    if vars.len() != 4 {
        return Err(Error::input("CHSH needs four distinct binary variables"));
    }
    // the marginal keeps ascending index order; permute to (a, b, s, t)
    let local = |v: VarId| VarId::new(vars.iter().position(|w| w == v).expect("member"));
    let m = p.marginal(vars)?.reorder(&[local(a), local(b), local(s), local(t)])?;
    let mut e = [[0.0; 2]; 2];
    for (si, row) in e.iter_mut().enumerate() {
        for (ti, cell) in row.iter_mut().enumerate() {
            let pst: f64 = (0..4).map(|ab| m.prob(&[ab >> 1, ab & 1, si, ti])).sum();
            if pst <= 0.0 {
                return Err(Error::input(format!("setting pair ({si},{ti}) has probability zero")));
            }
            *cell = (0..4)
                .map(|ab| {
                    let sign = if (ab >> 1) ^ (ab & 1) == 0 { 1.0 } else { -1.0 };
                    sign * m.prob(&[ab >> 1, ab & 1, si, ti])
                })
                .sum::<f64>()
                / pst;
        }
    }
    Ok((e[0][0] + e[0][1] + e[1][0] - e[1][1]).abs())
}

fn pr_conditional(a: usize, b: usize, s: usize, t: usize) -> f64 {
    let parity = a ^ b;
    let st = s & t;
    0.5 * ((1 ^ parity) * (st ^ 1)) as f64 + 0.5 * (parity * st) as f64
}

/// PR box over `A, B, S, T` with uniform independent settings.
pub fn pr_box() -> JointDistribution {
    let names = ["A", "B", "S", "T"].map(String::from).to_vec();
    let space = OutcomeSpace::new(names, vec![2; 4]).expect("16 cells");
    JointDistribution::from_fn(space, |v| 0.25 * pr_conditional(v[0], v[1], v[2], v[3])).expect("normalized")
}

/// PR box with an extra single-valued `lambda`, over the variables of
/// [`bell_network_dag`] in the same order.
pub fn pr_box_with_lambda() -> JointDistribution {
    let names = ["lambda", "S", "T", "A", "B"].map(String::from).to_vec();
    let space = OutcomeSpace::new(names, vec![1, 2, 2, 2, 2]).expect("16 cells");
    JointDistribution::from_fn(space, |v| 0.25 * pr_conditional(v[3], v[4], v[1], v[2])).expect("normalized")
}

/// The three relations of setting independence and no signalling:
/// `(S _||_ T)`, `(A _||_ T | S)`, `(B _||_ S | T)`, over the variables of `p`.
pub fn bell_k(p: &JointDistribution) -> Result<Vec<CiRelation>> {
    let id = |name: &str| {
        p.space()
            .id_of(name)
            .map(VarSet::singleton)
            .ok_or_else(|| Error::input(format!("missing variable {name}")))
    };
    let (a, b, s, t) = (id("A")?, id("B")?, id("S")?, id("T")?);
    Ok(vec![
        CiRelation::new(s, t, VarSet::EMPTY)?,
        CiRelation::new(a, t, s)?,
        CiRelation::new(b, s, t)?,
    ])
}

/// A fine-tuned classical model on the complete graph `Z -> Y`, `Z -> X`,
/// `Y -> X`: `Z` uniform on `{1, 2}`, `Y = u_y + Z` with `u_y = 1`, and
/// `X = Y + Z - k` with `k = u_y + k_offset`.
///
/// Values are stored as their integer index (`Z` in `0..3`, `Y` in `0..4`,
/// `X` in `0..5`); combinations with probability zero that would leave the
/// range map to 0.
#[derive(Debug, Clone)]
pub struct FineTunedModel {
    pub dag: Dag,
    pub list: CausalInputList,
    pub params: ClassicalModelParams,
}

pub const FINETUNE_U_Y: i64 = 1;

pub fn finetune_model(k_offset: i64) -> FineTunedModel {
    let dag = Dag::named(&["Z", "Y", "X"], &[(0, 1), (0, 2), (1, 2)]).expect("fixed graph");
    let list = causal_input_list(&dag, &dag.topological_order()).expect("topological order");
    let k = FINETUNE_U_Y + k_offset;
    let sizes = vec![3, 4, 5];
    let clamp = |v: i64, size: usize| if (0..size as i64).contains(&v) { v as usize } else { 0 };
    let fy: Vec<usize> = (0..3).map(|z| clamp(FINETUNE_U_Y + z, sizes[1])).collect();
    // X's parents are Z then Y
    let fx: Vec<usize> = (0..3)
        .flat_map(|z| (0..4).map(move |y| (z, y)))
        .map(|(z, y)| clamp(y + z - k, sizes[2]))
        .collect();
    let params = ClassicalModelParams {
        names: ["Z", "Y", "X"].map(String::from).to_vec(),
        sizes,
        mechanisms: vec![
            Mechanism::Marginal(vec![0.0, 0.5, 0.5]),
            Mechanism::Function { table: fy, noise: vec![1.0] },
            Mechanism::Function { table: fx, noise: vec![1.0] },
        ],
    };
    FineTunedModel { dag, list, params }
}

/// Result of one fine-tuning run.
#[derive(Debug, Clone)]
pub struct FineTuneRun {
    pub dag: Dag,
    pub distribution: JointDistribution,
    pub verdict: MapVerdict,
}

pub fn finetune_run(k_offset: i64, tol: f64) -> Result<FineTuneRun> {
    let m = finetune_model(k_offset);
    let p = generate_ccm(&m.list, &m.params)?;
    let verdict = check_map(&m.dag, &p, SeparationRule::D, tol)?;
    Ok(FineTuneRun {
        dag: m.dag,
        distribution: p,
        verdict,
    })
}

/// The fine-tuned model with `k = u_y`.
pub fn finetune_demo() -> Result<FineTuneRun> {
    finetune_run(0, crate::distribution::EXACT_TOL)
}

/// Summary of a seeded random search for large CHSH values on the Bell
/// network.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub draws: usize,
    pub seed: u64,
    pub max_chsh: f64,
    pub argmax: usize,
    pub mean_chsh: f64,
    pub above_bound: usize,
}

pub const PROBE_SLACK: f64 = 1e-6;

impl ProbeReport {
    pub fn within_bound(&self) -> bool {
        self.above_bound == 0
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "prbox-probe draws={} seed={}", self.draws, self.seed);
        let _ = writeln!(s, "max CHSH: {:.12} (draw {})", self.max_chsh, self.argmax);
        let _ = writeln!(s, "mean CHSH: {:.12}", self.mean_chsh);
        let _ = writeln!(s, "bound: {:.12} + {PROBE_SLACK:e}", TSIRELSON);
        let _ = writeln!(s, "draws above bound: {}", self.above_bound);
        let _ = writeln!(s, "verdict: {}", if self.within_bound() { "WITHIN BOUND" } else { "BOUND VIOLATED" });
        s
    }
}

/// Random model on [`bell_network_dag`]: one random two-qubit source
/// state, one random unitary per setting value, uniform settings.
pub fn random_bell_network_qcm<R: Rng + ?Sized>(rng: &mut R) -> Result<Qcm> {
    let g = bell_network_dag(1);
    let mut params = QuantumModelParams::default();
    params.preps.insert(VarId(0), vec![random_state(4, rng)]);
    params.gates.insert(VarId(1), vec![random_unitary(2, rng), random_unitary(2, rng)]);
    params.gates.insert(VarId(2), vec![random_unitary(2, rng), random_unitary(2, rng)]);
    Qcm::new(g, params)
}

/// CHSH over `draws` random models; draw `i` uses stream `i` of a ChaCha8
/// generator seeded with `seed`, so the report does not depend on scheduling.
pub fn prbox_probe(draws: usize, seed: u64) -> Result<ProbeReport> {
    if draws == 0 {
        return Err(Error::input("the probe needs at least one draw"));
    }
    let values: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let q = random_bell_network_qcm(&mut rng)?;
            chsh(&q.evaluate()?)
        })
        .collect::<Result<_>>()?;
    let (argmax, max_chsh) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    Ok(ProbeReport {
        draws,
        seed,
        max_chsh,
        argmax,
        mean_chsh: values.iter().sum::<f64>() / draws as f64,
        above_bound: values.iter().filter(|&&v| v > TSIRELSON + PROBE_SLACK).count(),
    })
}
