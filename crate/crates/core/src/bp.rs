//! Sparse belief propagation for block-model labels with a clamped seed set.
//!
//! Messages and beliefs are updated in log space. A sweep visits nodes in a
//! fixed random order; at each node the incoming messages are combined once
//! and every outgoing message is the cavity of that product, so updates use
//! the freshest values available. The field `xi` follows the class belief
//! totals either after every node or once per sweep, see [`FieldSchedule`].

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::rng::stream;
use crate::sbm::{Graph, SbmParams};

const STREAM_MESSAGES: u64 = 0;
const STREAM_ORDER: u64 = 1;

/// When the field `xi` is refreshed from the belief totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSchedule {
    /// After each node's belief changes. On dense graphs the random initial
    /// messages can otherwise drive both blocks into one class within the
    /// first sweep.
    #[default]
    PerNode,
    /// Once at the start of each sweep.
    PerSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpParams {
    /// Scaled affinities `c_sr = n p_sr` with `n` the total node count.
    pub c: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub field_schedule: FieldSchedule,
}

impl BpParams {
    pub fn new(c: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        let p = BpParams { c, pi, tol: 1e-6, max_iters: 1000, field_schedule: FieldSchedule::PerNode };
        p.validate()?;
        Ok(p)
    }

    /// Affinities and proportions of a block model.
    pub fn from_sbm(params: &SbmParams) -> Result<Self> {
        params.validate()?;
        let n = params.n as f64;
        let c = params.p.iter().map(|row| row.iter().map(|p| p * n).collect()).collect();
        let pi = params.block_sizes().iter().map(|&s| s as f64 / n).collect();
        BpParams::new(c, pi)
    }

    pub fn classes(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.classes();
        if c == 0 {
            return Err(Error::invalid("need at least one class"));
        }
        if self.c.len() != c || self.c.iter().any(|r| r.len() != c) {
            return Err(Error::invalid(format!("affinity matrix must be {c}x{c}")));
        }
        if self.c.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("affinities must be finite and non-negative"));
        }
        for i in 0..c {
            for j in 0..i {
                if (self.c[i][j] - self.c[j][i]).abs() > 1e-12 * (1.0 + self.c[i][j].abs()) {
                    return Err(Error::invalid("affinity matrix must be symmetric"));
                }
            }
        }
        if self.pi.iter().any(|&p| !(p > 0.0)) || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("class proportions must be positive and sum to 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    classes: usize,
    /// `messages[e * C + s]` for the arc stored at CSR position `e`, `i -> targets[e]`.
    messages: Vec<f64>,
    /// Position of the reverse arc.
    reverse: Vec<usize>,
    beliefs: Vec<f64>,
    xi: Vec<f64>,
    clamped: Vec<bool>,
    order: Vec<usize>,
    sweeps: usize,
}

impl BpState {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn belief(&self, v: usize) -> &[f64] {
        &self.beliefs[v * self.classes..(v + 1) * self.classes]
    }

    pub fn beliefs(&self) -> impl Iterator<Item = &[f64]> {
        self.beliefs.chunks(self.classes)
    }

    pub fn messages(&self) -> impl Iterator<Item = &[f64]> {
        self.messages.chunks(self.classes)
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn is_clamped(&self, v: usize) -> bool {
        self.clamped[v]
    }

    /// Argmax class per node, ties to the lowest class.
    pub fn labeling(&self) -> Vec<usize> {
        self.beliefs()
            .map(|b| b.iter().enumerate().fold(0, |best, (s, &x)| if x > b[best] { s } else { best }))
            .collect()
    }

    pub fn write_beliefs_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "node,class,belief")?;
        for (v, b) in self.beliefs().enumerate() {
            for (s, x) in b.iter().enumerate() {
                writeln!(out, "{v},{},{}", s + 1, sig17(*x))?;
            }
        }
        Ok(())
    }
}

fn check_graph(graph: &Graph, params: &BpParams) -> Result<()> {
    params.validate()?;
    if graph.is_directed() {
        return Err(Error::invalid("belief propagation needs an undirected graph"));
    }
    Ok(())
}

/// Seeds (class `seed_class`, 0-based) are clamped to that class; the other
/// beliefs start at the class proportions net of the seeds; each message is
/// a uniform draw from the simplex.
pub fn init(graph: &Graph, params: &BpParams, seeds: &[usize], seed_class: usize, rng_seed: u64) -> Result<BpState> {
    check_graph(graph, params)?;
    let n = graph.n();
    let c = params.classes();
    if seed_class >= c {
        return Err(Error::invalid(format!("seed class {} is not one of the {c} classes", seed_class + 1)));
    }
    let mut clamped = vec![false; n];
    for &s in seeds {
        if s >= n {
            return Err(Error::invalid(format!("seed {s} is not a node of a {n}-node graph")));
        }
        clamped[s] = true;
    }
    let num_seeds = clamped.iter().filter(|&&x| x).count() as f64;
    let capacity = params.pi[seed_class] * n as f64;
    if num_seeds >= capacity && num_seeds > 0.0 {
        return Err(Error::invalid(format!("{num_seeds} seeds fill the seed class capacity {capacity}")));
    }

    let free = n as f64 - num_seeds;
    let prior: Vec<f64> = (0..c)
        .map(|t| {
            let mass = params.pi[t] * n as f64 - if t == seed_class { num_seeds } else { 0.0 };
            mass / free
        })
        .collect();
    let mut indicator = vec![0.0; c];
    indicator[seed_class] = 1.0;

    let mut beliefs = Vec::with_capacity(n * c);
    for v in 0..n {
        beliefs.extend_from_slice(if clamped[v] { &indicator } else { &prior });
    }

    let mut rng = stream(rng_seed, STREAM_MESSAGES);
    let arcs = (0..n).map(|v| graph.out_neighbors(v).len()).sum::<usize>();
    let mut messages = Vec::with_capacity(arcs * c);
    let mut reverse = Vec::with_capacity(arcs);
    for i in 0..n {
        for &j in graph.out_neighbors(i) {
            let j = j as usize;
            let pos = graph.out_neighbors(j).binary_search(&(i as u32)).expect("undirected rows are symmetric");
            reverse.push(graph.row_offset(j) + pos);
            if clamped[i] {
                messages.extend_from_slice(&indicator);
            } else {
                let draw: Vec<f64> = (0..c).map(|_| rng.gen::<f64>()).collect();
                let total: f64 = draw.iter().sum();
                messages.extend(draw.iter().map(|x| x / total));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(rng_seed, STREAM_ORDER));
    let mut state = BpState { classes: c, messages, reverse, beliefs, xi: vec![0.0; c], clamped, order, sweeps: 0 };
    state.xi = field(&state, params, n);
    Ok(state)
}

fn belief_totals(state: &BpState) -> Vec<f64> {
    let mut totals = vec![0.0; state.classes];
    for b in state.beliefs() {
        for (t, x) in totals.iter_mut().zip(b) {
            *t += x;
        }
    }
    totals
}

/// `ln xi_s = ln pi_s - (1/n) sum_r c_sr B_r` for class belief totals `B`.
fn log_field(totals: &[f64], params: &BpParams, n: usize, out: &mut [f64]) {
    for (s, o) in out.iter_mut().enumerate() {
        let h: f64 = totals.iter().zip(&params.c[s]).map(|(b, c)| c * b).sum();
        *o = safe_ln(params.pi[s]) - h / n as f64;
    }
}

/// `xi_s = pi_s exp(-(1/n) sum_k sum_r c_sr psi_r^k)`.
fn field(state: &BpState, params: &BpParams, n: usize) -> Vec<f64> {
    let mut logs = vec![0.0; state.classes];
    log_field(&belief_totals(state), params, n, &mut logs);
    logs.into_iter().map(f64::exp).collect()
}

fn safe_ln(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE).ln()
}

/// Normalizes log-weights into a probability vector in place.
fn normalize_logs(logs: &mut [f64]) {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in logs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    logs.iter_mut().for_each(|x| *x /= total);
}

/// One asynchronous pass; returns the largest change of any message entry.
pub fn sweep(state: &mut BpState, graph: &Graph, params: &BpParams) -> Result<f64> {
    check_graph(graph, params)?;
    let n = graph.n();
    let c = state.classes;
    if params.classes() != c || state.beliefs.len() != n * c {
        return Err(Error::invalid("state does not match graph and parameters"));
    }
    let per_node = params.field_schedule == FieldSchedule::PerNode;
    let sweep_index = state.sweeps + 1;
    let mut totals_b = belief_totals(state);
    let mut log_xi = vec![0.0; c];
    log_field(&totals_b, params, n, &mut log_xi);
    let mut max_delta: f64 = 0.0;
    let mut factors: Vec<f64> = Vec::new();
    let mut total = vec![0.0; c];
    let mut scratch = vec![0.0; c];
    for idx in 0..n {
        let i = state.order[idx];
        let nbrs = graph.out_neighbors(i);
        let base = graph.row_offset(i);
        // log sum_r c_sr psi_r^{k->i} for every neighbor k (self-loops skipped)
        factors.clear();
        total.copy_from_slice(&log_xi);
        for (e, &k) in nbrs.iter().enumerate() {
            if k as usize == i {
                factors.extend(std::iter::repeat_n(0.0, c));
                continue;
            }
            let incoming = &state.messages[state.reverse[base + e] * c..][..c];
            for s in 0..c {
                let f = safe_ln((0..c).map(|r| params.c[s][r] * incoming[r]).sum());
                factors.push(f);
                total[s] += f;
            }
        }
        if !state.clamped[i] {
            for (e, &k) in nbrs.iter().enumerate() {
                if k as usize == i {
                    continue;
                }
                for s in 0..c {
                    scratch[s] = total[s] - factors[e * c + s];
                }
                normalize_logs(&mut scratch);
                let slot = &mut state.messages[(base + e) * c..][..c];
                for s in 0..c {
                    if !scratch[s].is_finite() {
                        return Err(Error::NumericFailure { sweep: sweep_index, detail: format!("message {i}->{k} is not finite") });
                    }
                    max_delta = max_delta.max((scratch[s] - slot[s]).abs());
                    slot[s] = scratch[s];
                }
            }
            scratch.copy_from_slice(&total);
            normalize_logs(&mut scratch);
            if scratch.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericFailure { sweep: sweep_index, detail: format!("belief of node {i} is not finite") });
            }
            let old = &mut state.beliefs[i * c..(i + 1) * c];
            if per_node {
                for s in 0..c {
                    totals_b[s] += scratch[s] - old[s];
                }
                log_field(&totals_b, params, n, &mut log_xi);
            }
            old.copy_from_slice(&scratch);
        }
    }
    state.xi = field(state, params, n);
    state.sweeps = sweep_index;
    Ok(max_delta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpOutcome {
    #[serde(skip)]
    pub state: BpState,
    /// 0-based class per node.
    #[serde(skip)]
    pub labeling: Vec<usize>,
    pub converged: bool,
    pub sweeps: usize,
    pub max_delta: f64,
}

impl BpOutcome {
    /// `{"converged", "sweeps", "max_delta"}`.
    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Sweeps until the largest message change drops below `tol` or
/// `max_iters` sweeps have run.
pub fn run(graph: &Graph, params: &BpParams, seeds: &[usize], seed_class: usize, rng_seed: u64) -> Result<BpOutcome> {
    let mut state = init(graph, params, seeds, seed_class, rng_seed)?;
    let mut max_delta = f64::INFINITY;
    let mut converged = false;
    while state.sweeps < params.max_iters {
        max_delta = sweep(&mut state, graph, params)?;
        if max_delta < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("belief propagation stopped after {} sweeps with change {max_delta:e}", state.sweeps);
    }
    let labeling = state.labeling();
    let sweeps = state.sweeps;
    Ok(BpOutcome { state, labeling, converged, sweeps, max_delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 10] {
            for u in 0..10 {
                for v in u + 1..10 {
                    edges.push((base + u, base + v));
                }
            }
        }
        Graph::from_edges(20, false, &edges, (0..20).map(|v| v / 10).collect()).unwrap()
    }

    fn assortative(n: f64) -> BpParams {
        BpParams::new(vec![vec![0.9 * n, 0.05 * n], vec![0.05 * n, 0.9 * n]], vec![0.5, 0.5]).unwrap()
    }

    fn simplex_ok(state: &BpState) -> bool {
        state.messages().chain(state.beliefs()).all(|m| (m.iter().sum::<f64>() - 1.0).abs() < 1e-10)
    }

    #[test]
    fn single_class_is_trivial() {
        let g = two_cliques();
        let p = BpParams::new(vec![vec![5.0]], vec![1.0]).unwrap();
        let mut s = init(&g, &p, &[], 0, 1).unwrap();
        sweep(&mut s, &g, &p).unwrap();
        assert!(s.messages().chain(s.beliefs()).all(|m| m == [1.0]));
    }

    #[test]
    fn initial_beliefs_account_for_seeds() {
        let g = Graph::unlabeled(128, false, &[(0, 1), (1, 2)]).unwrap();
        let p = BpParams::new(vec![vec![40.0, 24.0], vec![24.0, 40.0]], vec![0.5, 0.5]).unwrap();
        let s = init(&g, &p, &[0, 5], 1, 3).unwrap();
        assert_eq!(s.belief(0), &[0.0, 1.0]);
        assert_eq!(s.belief(5), &[0.0, 1.0]);
        let free = s.belief(7);
        assert!((free[1] - 62.0 / 126.0).abs() < 1e-15);
        assert!((free[0] - 64.0 / 126.0).abs() < 1e-15);
        assert!(simplex_ok(&s));
        assert!(init(&g, &p, &(0..64).collect::<Vec<_>>(), 0, 3).is_err());
        assert!(init(&g, &p, &[200], 0, 3).is_err());
        assert!(init(&g, &p, &[0], 2, 3).is_err());
    }

    #[test]
    fn edgeless_graph() {
        let g = Graph::unlabeled(6, false, &[]).unwrap();
        let mut p = BpParams::new(vec![vec![3.0, 1.0], vec![1.0, 3.0]], vec![0.5, 0.5]).unwrap();
        p.field_schedule = FieldSchedule::PerSweep;
        let mut s = init(&g, &p, &[0], 0, 1).unwrap();
        assert_eq!(s.messages().count(), 0);
        let xi = s.xi().to_vec();
        assert_eq!(sweep(&mut s, &g, &p).unwrap(), 0.0);
        let want = [xi[0] / (xi[0] + xi[1]), xi[1] / (xi[0] + xi[1])];
        for v in 1..6 {
            assert!((s.belief(v)[0] - want[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn cliques_follow_the_seed() {
        let g = two_cliques();
        let p = assortative(20.0);
        let out = run(&g, &p, &[3], 0, 11).unwrap();
        assert!(out.converged);
        for v in 0..10 {
            assert!(out.state.belief(v)[0] >= 0.99, "{v}: {:?}", out.state.belief(v));
        }
        assert!(simplex_ok(&out.state));
    }

    #[test]
    fn clamps_and_simplices_survive_sweeps() {
        let g = two_cliques();
        let p = assortative(20.0);
        let mut s = init(&g, &p, &[2, 12], 1, 4).unwrap();
        let before: Vec<u64> = s.belief(2).iter().map(|x| x.to_bits()).collect();
        for _ in 0..5 {
            sweep(&mut s, &g, &p).unwrap();
            assert!(simplex_ok(&s));
            let now: Vec<u64> = s.belief(2).iter().map(|x| x.to_bits()).collect();
            assert_eq!(now, before);
        }
    }

    #[test]
    fn field_tracks_beliefs_after_a_sweep() {
        let g = two_cliques();
        for schedule in [FieldSchedule::PerNode, FieldSchedule::PerSweep] {
            let mut p = assortative(20.0);
            p.field_schedule = schedule;
            let mut s = init(&g, &p, &[1], 0, 6).unwrap();
            sweep(&mut s, &g, &p).unwrap();
            let fresh = field(&s, &p, 20);
            assert_eq!(s.xi(), &fresh[..]);
        }
    }

    #[test]
    fn per_node_field_separates_cliques() {
        let g = two_cliques();
        let p = assortative(20.0);
        for rng in 0..30 {
            let out = run(&g, &p, &[4], 0, rng).unwrap();
            assert!(out.converged);
            let ones = |r: std::ops::Range<usize>| r.filter(|&v| out.labeling[v] == 1).count();
            // the cliques split, though the seed's clique may outvote the clamp
            assert!(ones(0..10).abs_diff(ones(10..20)) >= 9, "rng {rng}: {:?}", out.labeling);
        }
    }

    #[test]
    fn deterministic() {
        let g = two_cliques();
        let p = assortative(20.0);
        assert_eq!(run(&g, &p, &[0], 0, 8).unwrap(), run(&g, &p, &[0], 0, 8).unwrap());
    }

    #[test]
    fn labeling_ties_go_low() {
        let g = Graph::unlabeled(3, false, &[]).unwrap();
        let p = BpParams::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let s = init(&g, &p, &[], 0, 0).unwrap();
        assert_eq!(s.labeling(), vec![0, 0, 0]);
    }

    #[test]
    fn metadata_json_fields() {
        let g = two_cliques();
        let out = run(&g, &assortative(20.0), &[0], 0, 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.metadata_json().unwrap()).unwrap();
        assert_eq!(v["converged"], true);
        assert!(v["sweeps"].as_u64().unwrap() >= 1);
        assert!(v["max_delta"].as_f64().unwrap() < 1e-6);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BpParams::new(vec![vec![1.0, 2.0], vec![3.0, 1.0]], vec![0.5, 0.5]).is_err());
        assert!(BpParams::new(vec![vec![1.0]], vec![0.5]).is_err());
        let g = Graph::unlabeled(3, true, &[(0, 1)]).unwrap();
        assert!(init(&g, &BpParams::new(vec![vec![1.0]], vec![1.0]).unwrap(), &[], 0, 0).is_err());
    }
}
