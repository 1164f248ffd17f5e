//! Liquid time-constant cell.
//!
//! Each neuron `i` carries a leak conductance `gleak`, a leak reversal
//! potential `vleak` and a membrane capacitance `cm`. Each synapse `j → i`
//! carries a conductance weight `w`, a sigmoid midpoint `mu`, a steepness
//! `sigma` and a reversal potential `erev` equal to the wiring polarity.
//! The state is advanced by `unfolds` fused semi-implicit Euler steps with
//! `δ = elapsed / unfolds`:
//!
//! ```text
//! v_i ← (cm_i/δ · v_i + gleak_i · vleak_i + Σ_j w_ji σ_ji erev_ji)
//!       / (cm_i/δ + gleak_i + Σ_j w_ji σ_ji)
//! σ_ji = logistic((v_pre_j − mu_ji) · sigma_ji)
//! ```
//!
//! The sums run over inter-unit synapses (presynaptic `v`) and sensory
//! synapses (presynaptic `input_w · x + input_b`). Motor outputs are
//! `output_w · v_motor + output_b`.
//!
//! Synapse parameters are stored as flat vectors with one entry per synapse
//! (in the row-major order of [`NcpWiring::synapses`]) and scattered into
//! dense masked matrices inside the graph, so parameters exist only where
//! the wiring has a synapse.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, ParamStore, GATHER_ZERO};
use crate::tensor::sigmoid;
use crate::wiring::NcpWiring;
use crate::{Error, Result, Rng, Scalar, Tensor};

/// Floor applied to `gleak`, `cm`, `sigma` and `w` after every optimizer step.
pub const POSITIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtcConfig {
    pub unfolds: usize,
    pub elapsed: f64,
}

impl Default for LtcConfig {
    fn default() -> Self {
        Self {
            unfolds: 6,
            elapsed: 1.0,
        }
    }
}

impl LtcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.unfolds == 0 {
            return Err(Error::InvalidConfig("unfolds must be at least 1".into()));
        }
        if !(self.elapsed.is_finite() && self.elapsed > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "elapsed {} must be positive",
                self.elapsed
            )));
        }
        Ok(())
    }
}

/// `logistic((v_pre − mu) · sigma)`.
pub fn synapse_activation(v_pre: f64, mu: f64, sigma: f64) -> f64 {
    sigmoid((v_pre - mu) * sigma)
}

/// Neuron potentials, one per non-sensory neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct LtcState<T: Scalar = f32> {
    pub v: Tensor<T>,
}

impl<T: Scalar> LtcState<T> {
    pub fn zeros(neurons: usize) -> Self {
        Self {
            v: Tensor::vector(vec![T::zero(); neurons]),
        }
    }
}

/// Initialization ranges, all uniform.
pub mod init {
    pub const GLEAK: (f64, f64) = (0.001, 1.0);
    pub const VLEAK: (f64, f64) = (-0.2, 0.2);
    pub const CM: (f64, f64) = (0.4, 0.6);
    pub const W: (f64, f64) = (0.001, 1.0);
    pub const SIGMA: (f64, f64) = (3.0, 8.0);
    pub const MU: (f64, f64) = (0.3, 0.8);
}

/// Masked-matrix layout of one wiring.
struct Scatter {
    /// Position in a `rows × N` matrix → synapse index, or [`GATHER_ZERO`].
    index: Arc<[usize]>,
    /// Reversal potentials in the same dense layout (0 where absent).
    erev: Vec<f64>,
    rows: usize,
    synapses: usize,
}

impl Scatter {
    fn new(rows: usize, n: usize, synapses: impl Iterator<Item = (usize, usize, i8)>) -> Self {
        let mut index = vec![GATHER_ZERO; rows * n];
        let mut erev = vec![0.0; rows * n];
        let mut count = 0;
        for (src, dst, p) in synapses {
            index[src * n + dst] = count;
            erev[src * n + dst] = p as f64;
            count += 1;
        }
        Self {
            index: index.into(),
            erev,
            rows,
            synapses: count,
        }
    }
}

/// An LTC cell bound to a fixed wiring.
#[derive(Clone)]
pub struct LtcCell {
    wiring: NcpWiring,
    config: LtcConfig,
    inter: Arc<Scatter>,
    sensory: Arc<Scatter>,
}

impl std::fmt::Debug for LtcCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LtcCell")
            .field("counts", &self.wiring.counts())
            .field("synapses", &self.inter.synapses)
            .field("sensory_synapses", &self.sensory.synapses)
            .field("config", &self.config)
            .finish()
    }
}

/// Graph nodes shared by every step of one unrolled sequence.
#[derive(Clone, Debug)]
pub struct LtcNodes {
    inter: Option<Masked>,
    sensory: Option<Masked>,
    input_w: NodeId,
    input_b: NodeId,
    output_w: NodeId,
    output_b: NodeId,
    cm_over_dt: NodeId,
    gleak: NodeId,
    leak_current: NodeId,
    ones_n: NodeId,
    ones_s: NodeId,
}

#[derive(Clone, Copy, Debug)]
struct Masked {
    w: NodeId,
    mu: NodeId,
    sigma: NodeId,
    w_erev: NodeId,
}

fn qualified(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl LtcCell {
    pub fn new(wiring: NcpWiring, config: LtcConfig) -> Result<Self> {
        config.validate()?;
        let n = wiring.neurons();
        let inter = Scatter::new(n, n, wiring.synapses());
        let sensory = Scatter::new(wiring.counts().sensory, n, wiring.sensory_synapses());
        Ok(Self {
            wiring,
            config,
            inter: Arc::new(inter),
            sensory: Arc::new(sensory),
        })
    }

    pub fn wiring(&self) -> &NcpWiring {
        &self.wiring
    }

    pub fn config(&self) -> LtcConfig {
        self.config
    }

    pub fn neurons(&self) -> usize {
        self.wiring.neurons()
    }

    pub fn sensory_size(&self) -> usize {
        self.wiring.counts().sensory
    }

    pub fn motor_size(&self) -> usize {
        self.wiring.counts().motor
    }

    /// Trainable scalar count: three per synapse (inter-unit and sensory),
    /// three per neuron, plus the input and output affine maps.
    pub fn param_count(&self) -> usize {
        3 * (self.inter.synapses + self.sensory.synapses)
            + 3 * self.neurons()
            + 2 * self.sensory_size()
            + 2 * self.motor_size()
    }

    /// Samples parameters uniformly from the [`init`] ranges.
    ///
    /// Synapse tensors are omitted when the wiring has no synapses of that
    /// kind.
    pub fn init_params<T: Scalar>(&self, rng: &mut Rng) -> Result<ParamStore<T>> {
        let mut store = ParamStore::new();
        let n = self.neurons();
        let mut uniform =
            |len: usize, (lo, hi): (f64, f64)| Tensor::vector((0..len).map(|_| T::cast(rng.range(lo, hi))).collect());
        let floor = Some(POSITIVE_FLOOR);
        store.insert_bounded("gleak", uniform(n, init::GLEAK), floor)?;
        store.insert("vleak", uniform(n, init::VLEAK))?;
        store.insert_bounded("cm", uniform(n, init::CM), floor)?;
        for (prefix, count) in [("", self.inter.synapses), ("sensory_", self.sensory.synapses)] {
            if count == 0 {
                continue;
            }
            store.insert_bounded(format!("{prefix}w"), uniform(count, init::W), floor)?;
            store.insert(format!("{prefix}mu"), uniform(count, init::MU))?;
            store.insert_bounded(format!("{prefix}sigma"), uniform(count, init::SIGMA), floor)?;
        }
        let s = self.sensory_size();
        let m = self.motor_size();
        store.insert("input_w", Tensor::vector(vec![T::one(); s]))?;
        store.insert("input_b", Tensor::vector(vec![T::zero(); s]))?;
        store.insert("output_w", Tensor::vector(vec![T::one(); m]))?;
        store.insert("output_b", Tensor::vector(vec![T::zero(); m]))?;
        Ok(store)
    }

    fn masked<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        prefix: &str,
        kind: &str,
        layout: &Scatter,
    ) -> Result<Option<Masked>> {
        if layout.synapses == 0 {
            return Ok(None);
        }
        let shape = [layout.rows, self.neurons()];
        let mut dense = |name: &str| -> Result<NodeId> {
            let src = g.p(&qualified(prefix, &format!("{kind}{name}")))?;
            g.gather(src, layout.index.clone(), &shape)
        };
        let (w, mu, sigma) = (dense("w")?, dense("mu")?, dense("sigma")?);
        let erev = Tensor::new(&shape, layout.erev.iter().map(|&e| T::cast(e)).collect())?;
        let erev = g.constant(erev);
        let w_erev = g.mul(w, erev)?;
        Ok(Some(Masked { w, mu, sigma, w_erev }))
    }

    /// Prepares the per-sequence nodes from parameters already bound in `g`
    /// under `prefix` (e.g. `"ltc"` for `ltc.gleak`).
    pub fn bind<T: Scalar>(&self, g: &mut Graph<T>, prefix: &str) -> Result<LtcNodes> {
        let n = self.neurons();
        let p = |g: &Graph<T>, name: &str| g.p(&qualified(prefix, name));
        let inter = self.masked(g, prefix, "", &self.inter)?;
        let sensory = self.masked(g, prefix, "sensory_", &self.sensory)?;
        let dt = self.config.elapsed / self.config.unfolds as f64;
        let cm = p(g, "cm")?;
        let cm_over_dt = g.scale(cm, 1.0 / dt);
        let gleak = p(g, "gleak")?;
        let vleak = p(g, "vleak")?;
        let leak_current = g.mul(gleak, vleak)?;
        let ones_n = g.constant(Tensor::ones(&[1, n])?);
        let ones_s = g.constant(Tensor::ones(&[1, self.sensory_size()])?);
        Ok(LtcNodes {
            inter,
            sensory,
            input_w: p(g, "input_w")?,
            input_b: p(g, "input_b")?,
            output_w: p(g, "output_w")?,
            output_b: p(g, "output_b")?,
            cm_over_dt,
            gleak,
            leak_current,
            ones_n,
            ones_s,
        })
    }

    /// `(Σ_j w σ erev, Σ_j w σ)` into every neuron for presynaptic values `pre`.
    fn currents<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        nodes: &LtcNodes,
        m: &Masked,
        pre: NodeId,
        ones_rows: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let n = self.neurons();
        let rows = g.shape(pre)[0];
        let col = g.reshape(pre, &[rows, 1])?;
        let broadcast = g.matmul(col, nodes.ones_n)?;
        let centered = g.sub(broadcast, m.mu)?;
        let scaled = g.mul(centered, m.sigma)?;
        let act = g.sigmoid(scaled);
        let num = g.mul(act, m.w_erev)?;
        let den = g.mul(act, m.w)?;
        let num = g.matmul(ones_rows, num)?;
        let den = g.matmul(ones_rows, den)?;
        Ok((g.reshape(num, &[n])?, g.reshape(den, &[n])?))
    }

    /// One frame: advances `v` through `unfolds` solver steps driven by the
    /// sensory vector, returning the new potentials and the motor outputs.
    pub fn step_nodes<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        nodes: &LtcNodes,
        v: NodeId,
        sensory: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let (n, s) = (self.neurons(), self.sensory_size());
        if g.shape(v) != [n] || g.shape(sensory) != [s] {
            return Err(Error::shape("ltc_step", g.shape(v), g.shape(sensory)));
        }
        let x = g.mul(sensory, nodes.input_w)?;
        let x = g.add(x, nodes.input_b)?;
        let mut num_base = nodes.leak_current;
        let mut den_base = g.add(nodes.cm_over_dt, nodes.gleak)?;
        if let Some(m) = &nodes.sensory {
            let (sn, sd) = self.currents(g, nodes, m, x, nodes.ones_s)?;
            num_base = g.add(num_base, sn)?;
            den_base = g.add(den_base, sd)?;
        }
        let mut v = v;
        for _ in 0..self.config.unfolds {
            let mut num = g.mul(v, nodes.cm_over_dt)?;
            num = g.add(num, num_base)?;
            let mut den = den_base;
            if let Some(m) = &nodes.inter {
                let (inum, iden) = self.currents(g, nodes, m, v, nodes.ones_n)?;
                num = g.add(num, inum)?;
                den = g.add(den, iden)?;
            }
            v = g.div(num, den)?;
        }
        let start = n - self.motor_size();
        let motor = g.slice(v, start, self.motor_size())?;
        let motor = g.mul(motor, nodes.output_w)?;
        let motor = g.add(motor, nodes.output_b)?;
        Ok((v, motor))
    }

    /// Stand-alone step outside any training graph.
    pub fn step<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        state: &LtcState<T>,
        sensory: &Tensor<T>,
    ) -> Result<(LtcState<T>, Tensor<T>)> {
        let mut g = Graph::new();
        g.bind(params)?;
        let nodes = self.bind(&mut g, "")?;
        let v = g.constant(state.v.clone());
        let x = g.constant(sensory.clone());
        let (v, motor) = self.step_nodes(&mut g, &nodes, v, x)?;
        Ok((LtcState { v: g.value(v).clone() }, g.value(motor).clone()))
    }
}

/// Free-function form of [`LtcCell::step`].
pub fn ltc_step<T: Scalar>(
    state: &LtcState<T>,
    sensory: &Tensor<T>,
    params: &ParamStore<T>,
    cell: &LtcCell,
) -> Result<(LtcState<T>, Tensor<T>)> {
    cell.step(params, state, sensory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{gradcheck, GradcheckConfig};
    use crate::wiring::{build_ncp, LayerCounts, WiringConfig};

    /// Direct scalar-loop evaluation of the update, used as the oracle.
    fn reference_step(cell: &LtcCell, p: &ParamStore<f64>, v0: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let get = |name: &str| p.get(name).map(|t| t.to_vec()).unwrap_or_default();
        let (gleak, vleak, cm) = (get("gleak"), get("vleak"), get("cm"));
        let (w, mu, sigma) = (get("w"), get("mu"), get("sigma"));
        let (sw, smu, ssigma) = (get("sensory_w"), get("sensory_mu"), get("sensory_sigma"));
        let (iw, ib, ow, ob) = (get("input_w"), get("input_b"), get("output_w"), get("output_b"));
        let wiring = cell.wiring();
        let n = wiring.neurons();
        let cfg = cell.config();
        let dt = cfg.elapsed / cfg.unfolds as f64;
        let xa: Vec<f64> = (0..x.len()).map(|i| x[i] * iw[i] + ib[i]).collect();
        let mut v = v0.to_vec();
        for _ in 0..cfg.unfolds {
            let mut num: Vec<f64> = (0..n).map(|i| cm[i] / dt * v[i] + gleak[i] * vleak[i]).collect();
            let mut den: Vec<f64> = (0..n).map(|i| cm[i] / dt + gleak[i]).collect();
            for (k, (src, dst, pol)) in wiring.sensory_synapses().enumerate() {
                let a = sw[k] * synapse_activation(xa[src], smu[k], ssigma[k]);
                num[dst] += a * pol as f64;
                den[dst] += a;
            }
            for (k, (src, dst, pol)) in wiring.synapses().enumerate() {
                let a = w[k] * synapse_activation(v[src], mu[k], sigma[k]);
                num[dst] += a * pol as f64;
                den[dst] += a;
            }
            v = (0..n).map(|i| num[i] / den[i]).collect();
        }
        let m0 = n - wiring.counts().motor;
        let motor = (0..wiring.counts().motor).map(|j| ow[j] * v[m0 + j] + ob[j]).collect();
        (v, motor)
    }

    fn small_cell(seed: u64, unfolds: usize) -> LtcCell {
        let w = build_ncp(&WiringConfig::new(6, 4, 3, 2, seed)).unwrap();
        LtcCell::new(w, LtcConfig { unfolds, elapsed: 1.0 }).unwrap()
    }

    fn random_inputs(rng: &mut Rng, len: usize, scale: f64) -> Vec<f64> {
        (0..len).map(|_| rng.range(-scale, scale)).collect()
    }

    #[test]
    fn activation_examples() {
        assert_eq!(synapse_activation(0.4, 0.4, 5.0), 0.5);
        assert!((synapse_activation(1e6, 0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((synapse_activation(1.5, 0.5, 1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    fn unconnected(unfolds: usize) -> (LtcCell, ParamStore<f64>) {
        let wiring = NcpWiring::empty(LayerCounts::new(1, 1, 1, 1)).unwrap();
        let cell = LtcCell::new(wiring, LtcConfig { unfolds, elapsed: 1.0 }).unwrap();
        let mut p = cell.init_params::<f64>(&mut Rng::new(0)).unwrap();
        p.set("cm", Tensor::vector(vec![1.0; 3])).unwrap();
        p.set("gleak", Tensor::vector(vec![1.0; 3])).unwrap();
        (cell, p)
    }

    #[test]
    fn unconnected_neurons_rest_at_zero_leak() {
        let (cell, mut p) = unconnected(1);
        p.set("vleak", Tensor::vector(vec![0.0; 3])).unwrap();
        let (s, _) = cell.step(&p, &LtcState::zeros(3), &Tensor::vector(vec![0.7])).unwrap();
        assert_eq!(s.v.data(), &[0.0; 3]);
    }

    #[test]
    fn unconnected_single_step_halfway_to_leak() {
        let (cell, mut p) = unconnected(1);
        p.set("vleak", Tensor::vector(vec![1.0; 3])).unwrap();
        let (s, motor) = cell.step(&p, &LtcState::zeros(3), &Tensor::vector(vec![0.0])).unwrap();
        assert_eq!(s.v.data(), &[0.5; 3]);
        assert_eq!(motor.data(), &[0.5]);
    }

    #[test]
    fn matches_scalar_oracle() {
        for seed in 0..5 {
            let cell = small_cell(seed, 6);
            let mut rng = Rng::new(seed + 100);
            let p = cell.init_params::<f64>(&mut rng).unwrap();
            let v0 = random_inputs(&mut rng, cell.neurons(), 1.0);
            let x = random_inputs(&mut rng, cell.sensory_size(), 2.0);
            let (want_v, want_m) = reference_step(&cell, &p, &v0, &x);
            let (got, motor) = cell
                .step(&p, &LtcState { v: Tensor::vector(v0) }, &Tensor::vector(x))
                .unwrap();
            for (a, b) in got.v.data().iter().zip(&want_v) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            for (a, b) in motor.data().iter().zip(&want_m) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sensory_length_checked() {
        let cell = small_cell(0, 2);
        let p = cell.init_params::<f32>(&mut Rng::new(0)).unwrap();
        let err = cell.step(&p, &LtcState::zeros(cell.neurons()), &Tensor::vector(vec![0.0; 5]));
        assert!(err.is_err());
    }

    #[test]
    fn init_is_deterministic_positive_and_counted() {
        let cell = small_cell(3, 6);
        let a = cell.init_params::<f32>(&mut Rng::new(9)).unwrap();
        let b = cell.init_params::<f32>(&mut Rng::new(9)).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.value.data(), y.value.data());
        }
        for name in ["gleak", "cm", "w", "sigma", "sensory_w", "sensory_sigma"] {
            assert!(a.get(name).unwrap().data().iter().all(|&x| x > 0.0), "{name}");
        }
        let w = cell.wiring();
        let synapses = w.synapse_count() + w.sensory_synapse_count();
        let c = w.counts();
        let expected = 3 * synapses + 3 * c.neurons() + 2 * c.sensory + 2 * c.motor;
        assert_eq!(a.num_scalars(), expected);
        assert_eq!(cell.param_count(), expected);
    }

    #[test]
    fn envelope_holds_over_long_runs() {
        let cell = small_cell(11, 6);
        let mut rng = Rng::new(5);
        let p = cell.init_params::<f64>(&mut rng).unwrap();
        let vleak = p.get("vleak").unwrap().to_vec();
        let v0 = random_inputs(&mut rng, cell.neurons(), 3.0);
        let lo = vleak.iter().chain(&v0).copied().fold(-1.0, f64::min);
        let hi = vleak.iter().chain(&v0).copied().fold(1.0, f64::max);
        let mut state = LtcState { v: Tensor::vector(v0) };
        for _ in 0..1000 {
            let x = Tensor::vector(random_inputs(&mut rng, cell.sensory_size(), 10.0));
            state = cell.step(&p, &state, &x).unwrap().0;
            assert!(state.v.data().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn pure_leak_without_synaptic_weight() {
        let cell = small_cell(2, 6);
        let mut rng = Rng::new(1);
        let mut p = cell.init_params::<f64>(&mut rng).unwrap();
        let nw = p.get("w").unwrap().len();
        let ns = p.get("sensory_w").unwrap().len();
        p.set("w", Tensor::vector(vec![0.0; nw])).unwrap();
        p.set("sensory_w", Tensor::vector(vec![0.0; ns])).unwrap();
        let vleak = p.get("vleak").unwrap().to_vec();
        let v0 = random_inputs(&mut rng, cell.neurons(), 1.0);
        let x = Tensor::vector(random_inputs(&mut rng, cell.sensory_size(), 1.0));
        let (s, _) = cell
            .step(
                &p,
                &LtcState {
                    v: Tensor::vector(v0.clone()),
                },
                &x,
            )
            .unwrap();
        for i in 0..v0.len() {
            assert!((s.v.data()[i] - vleak[i]).abs() < (v0[i] - vleak[i]).abs());
        }
    }

    #[test]
    fn finer_unfolding_converges() {
        for seed in 0..5 {
            let mut rng = Rng::new(seed);
            let base = small_cell(seed, 1);
            let p = base.init_params::<f64>(&mut rng).unwrap();
            let v0 = LtcState {
                v: Tensor::vector(random_inputs(&mut rng, base.neurons(), 1.0)),
            };
            let x = Tensor::vector(random_inputs(&mut rng, base.sensory_size(), 1.0));
            let solve = |unfolds: usize| {
                let cell = LtcCell::new(base.wiring().clone(), LtcConfig { unfolds, elapsed: 1.0 }).unwrap();
                cell.step(&p, &v0, &x).unwrap().0.v.to_vec()
            };
            let diffs: Vec<f64> = [1, 2, 4, 8, 16]
                .windows(2)
                .map(|k| {
                    let (a, b) = (solve(k[0]), solve(k[1]));
                    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
                })
                .collect();
            for d in diffs.windows(2) {
                assert!(d[1] < d[0], "seed {seed}: {diffs:?}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cell = small_cell(4, 3);
        let mut rng = Rng::new(8);
        let p = cell.init_params::<f64>(&mut rng).unwrap();
        let xs: Vec<Tensor<f64>> = (0..3)
            .map(|_| Tensor::vector(random_inputs(&mut rng, cell.sensory_size(), 1.5)))
            .collect();
        let report = gradcheck(&p, GradcheckConfig::default(), |g| {
            let nodes = cell.bind(g, "")?;
            let mut v = g.constant(LtcState::<f64>::zeros(cell.neurons()).v);
            let mut loss = None;
            for x in &xs {
                let xn = g.constant(x.clone());
                let (nv, motor) = cell.step_nodes(g, &nodes, v, xn)?;
                v = nv;
                let e = g.sum_squared_error(motor, &Tensor::vector(vec![0.3, -0.2]))?;
                loss = Some(match loss {
                    None => e,
                    Some(l) => g.add(l, e)?,
                });
            }
            Ok(loss.unwrap())
        })
        .unwrap();
        assert!(report.max_error() < 1e-4, "{:?}", report.worst());
        assert_eq!(report.per_param.len(), p.len());
    }
}
