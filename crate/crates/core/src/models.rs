//! The six steering architectures.
//!
//! All of them share a convolutional head over a preprocessed `66×200×3`
//! frame:
//!
//! | layer | filters | kernel | stride | output |
//! |-------|---------|--------|--------|--------|
//! | conv1 | 24      | 5      | 2      | 31×98  |
//! | conv2 | 36      | 5      | 2      | 14×47  |
//! | conv3 | 48      | 5      | 2      | 5×22   |
//! | conv4 | 64      | 3      | 1      | 3×20   |
//! | conv5 | 64      | 3      | 1      | 1×18   |
//!
//! giving 1152 features after flattening. The baseline continues with dense
//! layers of 1164, 100, 50 and 10 units and a linear output. The circuit
//! models apply dropout, project to 100 latents (the sensory neurons) and feed
//! one or two LTC circuits; dual circuits see identical latents and their
//! motor outputs are fused.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId, ParamStore};
use crate::ltc::{LtcCell, LtcConfig, LtcState};
use crate::wiring::{build_ncp, WiringConfig};
use crate::{Error, Result, Rng, Scalar, Tensor};

pub const FRAME_SHAPE: [usize; 3] = [66, 200, 3];
pub const LATENTS: usize = 100;
const FLAT: usize = 1152;

/// `(name, kernel, filters, stride)`.
const CONVS: [(&str, usize, usize, usize); 5] = [
    ("conv1", 5, 24, 2),
    ("conv2", 5, 36, 2),
    ("conv3", 5, 48, 2),
    ("conv4", 3, 64, 1),
    ("conv5", 3, 64, 1),
];

/// Baseline dense stack after the convolutions, ReLU except `out`.
const BASELINE_DENSE: [(&str, usize); 5] = [("fc1", 1164), ("fc2", 100), ("fc3", 50), ("fc4", 10), ("out", 1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Cnn,
    CnnNcp,
    #[serde(rename = "cnn-dncp-v1")]
    CnnDncp1,
    #[serde(rename = "cnn-dncp-v2")]
    CnnDncp2,
    #[serde(rename = "cnn-dncp-v3")]
    CnnDncp3,
    #[serde(rename = "cnn-dncp-v4")]
    CnnDncp4,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Cnn,
        Variant::CnnNcp,
        Variant::CnnDncp1,
        Variant::CnnDncp2,
        Variant::CnnDncp3,
        Variant::CnnDncp4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cnn => "cnn",
            Variant::CnnNcp => "cnn-ncp",
            Variant::CnnDncp1 => "cnn-dncp-v1",
            Variant::CnnDncp2 => "cnn-dncp-v2",
            Variant::CnnDncp3 => "cnn-dncp-v3",
            Variant::CnnDncp4 => "cnn-dncp-v4",
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != Variant::Cnn
    }

    pub fn is_dual(self) -> bool {
        self.dual_counts().is_some()
    }

    /// `((left inter, left command), (right inter, right command))`.
    pub fn dual_counts(self) -> Option<((usize, usize), (usize, usize))> {
        match self {
            Variant::CnnDncp1 => Some(((3, 5), (4, 6))),
            Variant::CnnDncp2 => Some(((9, 7), (12, 8))),
            Variant::CnnDncp3 | Variant::CnnDncp4 => Some(((12, 8), (5, 3))),
            _ => None,
        }
    }

    pub fn default_fusion(self) -> Fusion {
        if self == Variant::CnnDncp4 {
            Fusion::Weighted
        } else {
            Fusion::Mean
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model variant `{s}`")))
    }
}

/// How the two motor outputs of a dual model become one steering value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    Mean,
    /// `softmax(fusion.logits) · [left, right]`, logits trainable.
    Weighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub variant: Variant,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Empty for the baseline, one circuit for CNN-NCP, `[left, right]` for
    /// the dual variants.
    pub circuits: Vec<WiringConfig>,
    pub fusion: Fusion,
    pub ltc: LtcConfig,
}

/// Wiring seeds fit in 63 bits so specs survive TOML's signed integers.
fn circuit_seed(seed: u64, stream: u64) -> u64 {
    Rng::mix(&[seed, stream]) >> 1
}

impl ArchitectureSpec {
    pub const DEFAULT_DROPOUT: f64 = 0.5;

    /// Default configuration of `variant`. v4 draws its wirings from
    /// different seed streams than v3, so the two differ in both fusion and
    /// connectivity.
    pub fn new(variant: Variant, seed: u64) -> Self {
        let circuits = match variant {
            Variant::Cnn => Vec::new(),
            Variant::CnnNcp => vec![WiringConfig::new(LATENTS, 12, 8, 1, circuit_seed(seed, 0))],
            v => {
                let ((li, lc), (ri, rc)) = v.dual_counts().expect("dual variant");
                let base = if v == Variant::CnnDncp4 { 3 } else { 1 };
                vec![
                    WiringConfig::new(LATENTS, li, lc, 1, circuit_seed(seed, base)),
                    WiringConfig::new(LATENTS, ri, rc, 1, circuit_seed(seed, base + 1)),
                ]
            }
        };
        Self {
            variant,
            dropout_rate: if variant == Variant::Cnn {
                0.0
            } else {
                Self::DEFAULT_DROPOUT
            },
            seed,
            circuits,
            fusion: variant.default_fusion(),
            ltc: LtcConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        self.ltc.validate()?;
        let expected = match self.variant {
            Variant::Cnn => 0,
            Variant::CnnNcp => 1,
            _ => 2,
        };
        if self.circuits.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "{} needs {expected} circuit(s), got {}",
                self.variant,
                self.circuits.len()
            )));
        }
        for c in &self.circuits {
            c.validate()?;
            if c.sensory != LATENTS || c.motor != 1 {
                return Err(Error::InvalidConfig(format!(
                    "circuits need {LATENTS} sensory and 1 motor neuron, got {} and {}",
                    c.sensory, c.motor
                )));
            }
        }
        if let Some(((li, lc), (ri, rc))) = self.variant.dual_counts() {
            let (l, r) = (&self.circuits[0], &self.circuits[1]);
            if (l.inter, l.command, r.inter, r.command) != (li, lc, ri, rc) {
                return Err(Error::InvalidConfig(format!(
                    "{} circuits must be left ({li}, {lc}) and right ({ri}, {rc}) inter/command neurons",
                    self.variant
                )));
            }
        }
        Ok(())
    }

    /// Parameter-name prefix of each circuit.
    pub fn circuit_prefixes(&self) -> &'static [&'static str] {
        match self.circuits.len() {
            0 => &[],
            1 => &["ltc"],
            _ => &["left", "right"],
        }
    }
}

fn glorot<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Tensor<T>> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::cast(rng.range(-limit, limit)))
}

/// Immutable structure of a model: its spec and circuits. Cheap to share
/// across threads; parameters live separately.
#[derive(Clone, Debug)]
pub struct Architecture {
    spec: ArchitectureSpec,
    circuits: Vec<(&'static str, LtcCell)>,
}

/// Recurrent state of every circuit, in spec order.
pub type States<T> = Vec<LtcState<T>>;

impl Architecture {
    pub fn new(spec: ArchitectureSpec) -> Result<Self> {
        spec.validate()?;
        let circuits = spec
            .circuit_prefixes()
            .iter()
            .zip(&spec.circuits)
            .map(|(&prefix, cfg)| Ok((prefix, LtcCell::new(build_ncp(cfg)?, spec.ltc)?)))
            .collect::<Result<_>>()?;
        Ok(Self { spec, circuits })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn circuits(&self) -> impl Iterator<Item = (&'static str, &LtcCell)> {
        self.circuits.iter().map(|(p, c)| (*p, c))
    }

    pub fn zero_states<T: Scalar>(&self) -> States<T> {
        self.circuits
            .iter()
            .map(|(_, c)| LtcState::zeros(c.neurons()))
            .collect()
    }

    /// Fresh Glorot-uniform weights, zero biases and sampled circuit
    /// parameters, all from `spec.seed`.
    pub fn init_params<T: Scalar>(&self) -> Result<ParamStore<T>> {
        let mut rng = Rng::derive(self.spec.seed, 0);
        let mut store = ParamStore::new();
        let mut channels = FRAME_SHAPE[2];
        for (name, k, f, _) in CONVS {
            store.insert(
                format!("{name}.w"),
                glorot(&[k, k, channels, f], k * k * channels, k * k * f, &mut rng)?,
            )?;
            store.insert(format!("{name}.b"), Tensor::zeros(&[f])?)?;
            channels = f;
        }
        let dense = |store: &mut ParamStore<T>, rng: &mut Rng, name: &str, i: usize, o: usize| {
            store.insert(format!("{name}.w"), glorot(&[i, o], i, o, rng)?)?;
            store.insert(format!("{name}.b"), Tensor::zeros(&[o])?)
        };
        if self.spec.variant == Variant::Cnn {
            let mut width = FLAT;
            for (name, units) in BASELINE_DENSE {
                dense(&mut store, &mut rng, name, width, units)?;
                width = units;
            }
            return Ok(store);
        }
        dense(&mut store, &mut rng, "latent", FLAT, LATENTS)?;
        for (prefix, cell) in &self.circuits {
            let circuit = cell.init_params(&mut rng)?;
            store.extend_prefixed(prefix, circuit)?;
        }
        if self.spec.fusion == Fusion::Weighted {
            store.insert("fusion.logits", Tensor::zeros(&[2])?)?;
        }
        Ok(store)
    }

    fn dense<T: Scalar>(&self, g: &mut Graph<T>, x: NodeId, name: &str, relu: bool) -> Result<NodeId> {
        let w = g.p(&format!("{name}.w"))?;
        let b = g.p(&format!("{name}.b"))?;
        let y = g.matmul(x, w)?;
        let y = g.add_bias(y, b)?;
        Ok(if relu { g.relu(y) } else { y })
    }

    /// Convolutions plus flatten: `66×200×3 → [1, 1152]`.
    fn conv_features<T: Scalar>(&self, g: &mut Graph<T>, frame: NodeId) -> Result<NodeId> {
        if g.shape(frame) != FRAME_SHAPE {
            return Err(Error::shape("feature head", g.shape(frame), &FRAME_SHAPE));
        }
        let mut x = frame;
        for (name, _, _, stride) in CONVS {
            let w = g.p(&format!("{name}.w"))?;
            let b = g.p(&format!("{name}.b"))?;
            x = g.conv2d(x, w, stride)?;
            x = g.add_bias(x, b)?;
            x = g.relu(x);
        }
        g.reshape(x, &[1, FLAT])
    }

    /// The circuit models' feature head: `66×200×3 → [100]` latents.
    pub fn latents<T: Scalar>(&self, g: &mut Graph<T>, frame: NodeId, dropout: Option<&mut Rng>) -> Result<NodeId> {
        let mut x = self.conv_features(g, frame)?;
        if let Some(rng) = dropout {
            x = g.dropout(x, self.spec.dropout_rate, rng)?;
        }
        let x = self.dense(g, x, "latent", true)?;
        g.reshape(x, &[LATENTS])
    }

    /// Steering predictions (each shape `[1]`) for `frames` in order, and the
    /// final circuit states. `states` defaults to zeros; `dropout` enables
    /// training-mode dropout.
    pub fn unroll<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        frames: &[NodeId],
        states: Option<&States<T>>,
        mut dropout: Option<&mut Rng>,
    ) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
        if self.spec.variant == Variant::Cnn {
            let mut preds = Vec::with_capacity(frames.len());
            for &f in frames {
                let mut x = self.conv_features(g, f)?;
                if let Some(rng) = dropout.as_deref_mut() {
                    x = g.dropout(x, self.spec.dropout_rate, rng)?;
                }
                for (i, (name, _)) in BASELINE_DENSE.iter().enumerate() {
                    x = self.dense(g, x, name, i + 1 < BASELINE_DENSE.len())?;
                }
                preds.push(g.reshape(x, &[1])?);
            }
            return Ok((preds, Vec::new()));
        }

        let mut nodes = Vec::with_capacity(self.circuits.len());
        let mut v = Vec::with_capacity(self.circuits.len());
        for (i, (prefix, cell)) in self.circuits.iter().enumerate() {
            nodes.push(cell.bind(g, prefix)?);
            let init = match states {
                Some(s) => s[i].v.clone(),
                None => LtcState::<T>::zeros(cell.neurons()).v,
            };
            v.push(g.constant(init));
        }
        let weights = match self.spec.fusion {
            Fusion::Weighted if self.circuits.len() == 2 => {
                let logits = g.p("fusion.logits")?;
                Some(g.softmax(logits))
            }
            _ => None,
        };

        let mut preds = Vec::with_capacity(frames.len());
        for &f in frames {
            let latent = self.latents(g, f, dropout.as_deref_mut())?;
            let mut motors = Vec::with_capacity(self.circuits.len());
            for (i, (_, cell)) in self.circuits.iter().enumerate() {
                let (nv, motor) = cell.step_nodes(g, &nodes[i], v[i], latent)?;
                v[i] = nv;
                motors.push(motor);
            }
            let pred = match (motors.as_slice(), weights) {
                ([m], _) => *m,
                (&[l, r], None) => {
                    let s = g.add(l, r)?;
                    g.scale(s, 0.5)
                }
                (&[l, r], Some(w)) => {
                    let both = g.concat(&[l, r])?;
                    let mixed = g.mul(both, w)?;
                    let s = g.sum(mixed);
                    g.reshape(s, &[1])?
                }
                _ => unreachable!("at most two circuits"),
            };
            preds.push(pred);
        }
        Ok((preds, v))
    }
}

/// Parameters, architecture and recurrent state for stateful inference.
#[derive(Clone, Debug)]
pub struct Model {
    arch: Architecture,
    params: ParamStore<f32>,
    state: States<f32>,
}

impl Model {
    pub fn new(spec: ArchitectureSpec) -> Result<Self> {
        let arch = Architecture::new(spec)?;
        let params = arch.init_params()?;
        let state = arch.zero_states();
        Ok(Self { arch, params, state })
    }

    /// Wraps existing parameters, which must match the spec's names and
    /// shapes exactly.
    pub fn from_params(spec: ArchitectureSpec, params: ParamStore<f32>) -> Result<Self> {
        let mut model = Self::new(spec)?;
        for e in params.iter() {
            let want = model.params.get(&e.name)?;
            if want.shape() != e.value.shape() {
                return Err(Error::shape("parameter", want.shape(), e.value.shape()));
            }
        }
        if let Some(missing) = model.params.names().find(|n| !params.contains(n)) {
            return Err(Error::InvalidConfig(format!("missing parameter `{missing}`")));
        }
        let fresh = std::mem::take(&mut model.params);
        for e in fresh.iter() {
            let value = params.get(&e.name)?.clone();
            model.params.insert_bounded(e.name.clone(), value, e.min)?;
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        self.arch.spec()
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn state(&self) -> &States<f32> {
        &self.state
    }

    pub fn reset_state(&mut self) {
        self.state = self.arch.zero_states();
    }

    /// One preprocessed frame through the model, dropout off, carrying
    /// recurrent state.
    pub fn step(&mut self, frame: &Tensor<f32>) -> Result<f32> {
        let mut g = Graph::new();
        g.bind(&self.params)?;
        let f = g.constant(frame.clone());
        let (preds, states) = self.arch.unroll(&mut g, &[f], Some(&self.state), None)?;
        for (s, id) in self.state.iter_mut().zip(states) {
            s.v = g.value(id).clone();
        }
        g.value(preds[0]).item()
    }

    /// Predictions for a `T×66×200×3` stack, in order, continuing from the
    /// current state.
    pub fn forward(&mut self, frames: &Tensor<f32>) -> Result<Tensor<f32>> {
        let shape = frames.shape();
        if shape.len() != 4 || shape[1..] != FRAME_SHAPE {
            return Err(Error::shape("forward", shape, &[0, 66, 200, 3]));
        }
        let preds = (0..shape[0])
            .map(|t| {
                let frame = frames.slice(t, 1)?.reshape(&FRAME_SHAPE)?;
                self.step(&frame)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::vector(preds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiring::validate;

    fn frame(seed: u64) -> Tensor<f32> {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(&FRAME_SHAPE, |_| rng.range(-1.0, 1.0) as f32).unwrap()
    }

    #[test]
    fn baseline_param_count_closed_form() {
        let mut want = 0;
        let mut c = 3;
        for (_, k, f, _) in CONVS {
            want += k * k * c * f + f;
            c = f;
        }
        let mut width = FLAT;
        for (_, units) in BASELINE_DENSE {
            want += width * units + units;
            width = units;
        }
        assert_eq!(want, 1_595_511);
        let m = Model::new(ArchitectureSpec::new(Variant::Cnn, 0)).unwrap();
        assert_eq!(m.num_params(), want);
    }

    #[test]
    fn latent_head_shape_chain() {
        let arch = Architecture::new(ArchitectureSpec::new(Variant::CnnNcp, 1)).unwrap();
        let params = arch.init_params::<f32>().unwrap();
        let mut g = Graph::new();
        g.bind(&params).unwrap();
        let f = g.constant(frame(0));
        let z = arch.latents(&mut g, f, None).unwrap();
        assert_eq!(g.shape(z), [LATENTS]);
        let mut x = frame(0);
        let mut chain = Vec::new();
        for (name, _, _, stride) in CONVS {
            x = x.conv2d(params.get(&format!("{name}.w")).unwrap(), stride).unwrap();
            chain.push(x.shape().to_vec());
        }
        assert_eq!(
            chain,
            [
                vec![31, 98, 24],
                vec![14, 47, 36],
                vec![5, 22, 48],
                vec![3, 20, 64],
                vec![1, 18, 64]
            ]
        );
        assert_eq!(x.len(), FLAT);
    }

    #[test]
    fn wrong_frame_shape_rejected() {
        let mut m = Model::new(ArchitectureSpec::new(Variant::Cnn, 0)).unwrap();
        let bad = Tensor::zeros(&[66, 200, 1]).unwrap();
        assert!(m.step(&bad).is_err());
    }

    #[test]
    fn zero_weights_give_final_bias() {
        let mut m = Model::new(ArchitectureSpec::new(Variant::Cnn, 0)).unwrap();
        let names: Vec<String> = m.params().names().map(String::from).collect();
        for n in names {
            let shape = m.params().get(&n).unwrap().shape().to_vec();
            m.params_mut().set(&n, Tensor::zeros(&shape).unwrap()).unwrap();
        }
        m.params_mut().set("out.b", Tensor::vector(vec![0.25])).unwrap();
        assert_eq!(m.step(&frame(3)).unwrap(), 0.25);
    }

    #[test]
    fn state_carried_and_reset() {
        let mut m = Model::new(ArchitectureSpec::new(Variant::CnnNcp, 2)).unwrap();
        let f = frame(1);
        let a = m.step(&f).unwrap();
        let b = m.step(&f).unwrap();
        assert_ne!(a, b);
        m.reset_state();
        assert_eq!(m.step(&f).unwrap(), a);
        assert!(a.abs() <= 1.0);
    }

    #[test]
    fn forward_sequence_matches_steps() {
        let mut m = Model::new(ArchitectureSpec::new(Variant::CnnDncp1, 4)).unwrap();
        let frames: Vec<Tensor<f32>> = (0..3).map(frame).collect();
        let stacked: Vec<f32> = frames.iter().flat_map(|f| f.to_vec()).collect();
        let stacked = Tensor::new(&[3, 66, 200, 3], stacked).unwrap();
        let out = m.forward(&stacked).unwrap();
        assert_eq!(out.shape(), [3]);
        m.reset_state();
        for (t, f) in frames.iter().enumerate() {
            assert_eq!(m.step(f).unwrap(), out.data()[t]);
        }
    }

    #[test]
    fn dual_counts_and_asymmetry() {
        for v in Variant::ALL.into_iter().filter(|v| v.is_dual()) {
            let arch = Architecture::new(ArchitectureSpec::new(v, 7)).unwrap();
            let cells: Vec<_> = arch.circuits().collect();
            assert_eq!(cells.len(), 2);
            let ((li, lc), (ri, rc)) = v.dual_counts().unwrap();
            let (l, r) = (cells[0].1.wiring(), cells[1].1.wiring());
            assert_eq!((l.counts().inter, l.counts().command), (li, lc));
            assert_eq!((r.counts().inter, r.counts().command), (ri, rc));
            assert_ne!(l, r);
            assert!(validate(l).is_empty() && validate(r).is_empty());
        }
        let v3 = ArchitectureSpec::new(Variant::CnnDncp3, 7);
        let v4 = ArchitectureSpec::new(Variant::CnnDncp4, 7);
        assert_eq!((v3.fusion, v4.fusion), (Fusion::Mean, Fusion::Weighted));
        assert_ne!(v3.circuits[0].seed, v4.circuits[0].seed);
    }

    #[test]
    fn v1_circuits_smaller_than_v2() {
        let size = |v| {
            Architecture::new(ArchitectureSpec::new(v, 0))
                .unwrap()
                .circuits()
                .map(|(_, c)| c.param_count())
                .sum::<usize>()
        };
        assert!(size(Variant::CnnDncp1) < size(Variant::CnnDncp2));
    }

    #[test]
    fn mean_fusion_averages_motors() {
        let arch = Architecture::new(ArchitectureSpec::new(Variant::CnnDncp3, 0)).unwrap();
        let mut params = arch.init_params::<f64>().unwrap();
        params.set("left.output_w", Tensor::vector(vec![0.0])).unwrap();
        params.set("left.output_b", Tensor::vector(vec![0.2])).unwrap();
        params.set("right.output_w", Tensor::vector(vec![0.0])).unwrap();
        params.set("right.output_b", Tensor::vector(vec![0.4])).unwrap();
        let mut g = Graph::new();
        g.bind(&params).unwrap();
        let f = g.constant(frame(0).cast());
        let (p, _) = arch.unroll(&mut g, &[f], None, None).unwrap();
        assert!((g.value(p[0]).item().unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut s = ArchitectureSpec::new(Variant::CnnDncp2, 0);
        s.circuits[0].inter = 10;
        assert!(Model::new(s).is_err());
        let mut s = ArchitectureSpec::new(Variant::CnnNcp, 0);
        s.circuits.clear();
        assert!(Model::new(s).is_err());
        assert_eq!("cnn-dncp-v2".parse::<Variant>().unwrap(), Variant::CnnDncp2);
        assert!("cnn-dncp-v9".parse::<Variant>().is_err());
    }
}
