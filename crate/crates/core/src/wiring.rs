//! Sparse four-layer connectomes: sensory → inter → command ⟲ → motor.
//!
//! Non-sensory neurons are indexed `0..N` in layer order (inter, then command,
//! then motor). Inter-unit synapses live in an `N×N` matrix indexed
//! `[src][dst]`; sensory synapses in an `S×N` matrix. Entries are polarities
//! in `{−1, 0, +1}`.
//!
//! Only these synapse kinds are legal:
//!
//! | from     | to       |
//! |----------|----------|
//! | sensory  | inter    |
//! | inter    | command  |
//! | command  | command (self-loops allowed) |
//! | command  | motor    |
//!
//! Sparsity is measured over those legal positions only, so a fully connected
//! wiring has sparsity 0.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Inter,
    Command,
    Motor,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Inter => "inter",
            Layer::Command => "command",
            Layer::Motor => "motor",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerCounts {
    pub sensory: usize,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
}

impl LayerCounts {
    pub fn new(sensory: usize, inter: usize, command: usize, motor: usize) -> Self {
        Self {
            sensory,
            inter,
            command,
            motor,
        }
    }

    /// Non-sensory neuron count.
    pub fn neurons(&self) -> usize {
        self.inter + self.command + self.motor
    }

    pub fn inter_range(&self) -> Range<usize> {
        0..self.inter
    }

    pub fn command_range(&self) -> Range<usize> {
        self.inter..self.inter + self.command
    }

    pub fn motor_range(&self) -> Range<usize> {
        self.inter + self.command..self.neurons()
    }

    pub fn layer_of(&self, neuron: usize) -> Layer {
        if neuron < self.inter {
            Layer::Inter
        } else if neuron < self.inter + self.command {
            Layer::Command
        } else {
            Layer::Motor
        }
    }

    /// Number of synapse slots the layer rules allow.
    pub fn allowed_positions(&self) -> usize {
        self.sensory * self.inter + self.inter * self.command + self.command * self.command + self.command * self.motor
    }

    fn check(&self) -> Result<()> {
        if self.sensory == 0 || self.inter == 0 || self.command == 0 || self.motor == 0 {
            return Err(Error::InvalidConfig(format!(
                "every layer needs at least one neuron, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Parameters of the five-phase NCP construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiringConfig {
    pub sensory: usize,
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
    /// Distinct inter targets per sensory neuron.
    pub sensory_fanout: usize,
    /// Distinct command targets per inter neuron.
    pub inter_fanout: usize,
    /// Random command → command synapses.
    pub recurrent_command_synapses: usize,
    /// Distinct command sources per motor neuron.
    pub motor_fanin: usize,
    pub seed: u64,
}

impl WiringConfig {
    pub const DEFAULT_SENSORY_FANOUT: usize = 2;
    pub const DEFAULT_INTER_FANOUT: usize = 5;
    pub const DEFAULT_RECURRENT_COMMAND_SYNAPSES: usize = 6;
    pub const DEFAULT_MOTOR_FANIN: usize = 6;

    /// Default fanouts, each capped at the size of the layer it targets.
    pub fn new(sensory: usize, inter: usize, command: usize, motor: usize, seed: u64) -> Self {
        Self {
            sensory,
            inter,
            command,
            motor,
            sensory_fanout: Self::DEFAULT_SENSORY_FANOUT.min(inter),
            inter_fanout: Self::DEFAULT_INTER_FANOUT.min(command),
            recurrent_command_synapses: Self::DEFAULT_RECURRENT_COMMAND_SYNAPSES.min(command * command),
            motor_fanin: Self::DEFAULT_MOTOR_FANIN.min(command),
            seed,
        }
    }

    pub fn counts(&self) -> LayerCounts {
        LayerCounts::new(self.sensory, self.inter, self.command, self.motor)
    }

    pub fn validate(&self) -> Result<()> {
        self.counts().check()?;
        let bad = |what: &str, v: usize, lo: usize, hi: usize| {
            Error::InvalidConfig(format!("{what} = {v} must lie in [{lo}, {hi}]"))
        };
        if !(1..=self.inter).contains(&self.sensory_fanout) {
            return Err(bad("sensory_fanout", self.sensory_fanout, 1, self.inter));
        }
        if !(1..=self.command).contains(&self.inter_fanout) {
            return Err(bad("inter_fanout", self.inter_fanout, 1, self.command));
        }
        if !(1..=self.command).contains(&self.motor_fanin) {
            return Err(bad("motor_fanin", self.motor_fanin, 1, self.command));
        }
        let cc = self.command * self.command;
        if self.recurrent_command_synapses > cc {
            return Err(bad(
                "recurrent_command_synapses",
                self.recurrent_command_synapses,
                0,
                cc,
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NcpWiring {
    counts: LayerCounts,
    adj: Vec<i8>,
    sensory_adj: Vec<i8>,
}

/// One broken wiring invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// A neuron without the required incoming synapse from the layer below.
    Uncovered { layer: Layer, neuron: usize },
    /// A sensory synapse into a non-inter neuron.
    SensoryInto {
        sensory: usize,
        neuron: usize,
        layer: Layer,
    },
    /// An inter-unit synapse between layers that may not connect.
    Forbidden {
        src: usize,
        src_layer: Layer,
        dst: usize,
        dst_layer: Layer,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Uncovered { layer, neuron } => {
                write!(f, "{layer} neuron {neuron} has no incoming synapse")
            }
            Violation::SensoryInto { sensory, neuron, layer } => {
                write!(f, "sensory {sensory} projects into {layer} neuron {neuron}")
            }
            Violation::Forbidden {
                src,
                src_layer,
                dst,
                dst_layer,
            } => write!(f, "forbidden synapse {src_layer} {src} → {dst_layer} {dst}"),
        }
    }
}

impl NcpWiring {
    /// A wiring with no synapses.
    pub fn empty(counts: LayerCounts) -> Result<Self> {
        counts.check()?;
        let n = counts.neurons();
        Ok(Self {
            counts,
            adj: vec![0; n * n],
            sensory_adj: vec![0; counts.sensory * n],
        })
    }

    /// Assembles a wiring from raw matrices without checking layer rules
    /// (use [`validate`] for that).
    pub fn from_parts(counts: LayerCounts, adj: Vec<i8>, sensory_adj: Vec<i8>) -> Result<Self> {
        counts.check()?;
        let n = counts.neurons();
        if adj.len() != n * n || sensory_adj.len() != counts.sensory * n {
            return Err(Error::InvalidShape {
                shape: vec![adj.len(), sensory_adj.len()],
                reason: format!("expected {}×{n} and {}×{n} matrices", n, counts.sensory),
            });
        }
        if adj.iter().chain(&sensory_adj).any(|p| !(-1..=1).contains(p)) {
            return Err(Error::InvalidConfig("polarities must be −1, 0 or +1".into()));
        }
        Ok(Self {
            counts,
            adj,
            sensory_adj,
        })
    }

    pub fn counts(&self) -> LayerCounts {
        self.counts
    }

    pub fn neurons(&self) -> usize {
        self.counts.neurons()
    }

    pub fn layer_of(&self, neuron: usize) -> Layer {
        self.counts.layer_of(neuron)
    }

    /// Polarity of the synapse `src → dst` (0 if absent).
    pub fn synapse(&self, src: usize, dst: usize) -> i8 {
        self.adj[src * self.neurons() + dst]
    }

    pub fn sensory_synapse(&self, sensory: usize, dst: usize) -> i8 {
        self.sensory_adj[sensory * self.neurons() + dst]
    }

    pub fn set_synapse(&mut self, src: usize, dst: usize, polarity: i8) {
        assert!((-1..=1).contains(&polarity));
        let n = self.neurons();
        self.adj[src * n + dst] = polarity;
    }

    pub fn set_sensory_synapse(&mut self, sensory: usize, dst: usize, polarity: i8) {
        assert!((-1..=1).contains(&polarity));
        let n = self.neurons();
        self.sensory_adj[sensory * n + dst] = polarity;
    }

    /// Row-major `N×N` inter-unit polarities.
    pub fn adjacency(&self) -> &[i8] {
        &self.adj
    }

    /// Row-major `S×N` sensory polarities.
    pub fn sensory_adjacency(&self) -> &[i8] {
        &self.sensory_adj
    }

    pub fn synapse_count(&self) -> usize {
        self.adj.iter().filter(|&&p| p != 0).count()
    }

    pub fn sensory_synapse_count(&self) -> usize {
        self.sensory_adj.iter().filter(|&&p| p != 0).count()
    }

    /// `(src, dst, polarity)` for every inter-unit synapse, row-major order.
    pub fn synapses(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        let n = self.neurons();
        self.adj
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0)
            .map(move |(k, &p)| (k / n, k % n, p))
    }

    pub fn sensory_synapses(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        let n = self.neurons();
        self.sensory_adj
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0)
            .map(move |(k, &p)| (k / n, k % n, p))
    }

    /// Same nonzero pattern, ignoring polarity.
    pub fn same_support(&self, other: &Self) -> bool {
        self.counts == other.counts
            && self
                .adj
                .iter()
                .zip(&other.adj)
                .chain(self.sensory_adj.iter().zip(&other.sensory_adj))
                .all(|(a, b)| (*a != 0) == (*b != 0))
    }

    fn has_incoming_from(&self, dst: usize, sources: Range<usize>) -> bool {
        sources.into_iter().any(|s| self.synapse(s, dst) != 0)
    }

    fn has_sensory_input(&self, dst: usize) -> bool {
        (0..self.counts.sensory).any(|s| self.sensory_synapse(s, dst) != 0)
    }

    /// Plain-text dump: a `sensory inter command motor` header, then one
    /// `src dst polarity` line per synapse. Ids are global: sensory neurons
    /// are `0..S` and the rest follow in layer order from `S`.
    pub fn to_text(&self) -> String {
        let c = self.counts;
        let mut out = format!("{} {} {} {}\n", c.sensory, c.inter, c.command, c.motor);
        for (s, d, p) in self.sensory_synapses() {
            out.push_str(&format!("{} {} {}\n", s, c.sensory + d, p));
        }
        for (s, d, p) in self.synapses() {
            out.push_str(&format!("{} {} {}\n", c.sensory + s, c.sensory + d, p));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let parse_err = |row: usize, reason: String| Error::InvalidConfig(format!("wiring line {row}: {reason}"));
        let header: Vec<usize> = lines
            .next()
            .ok_or(Error::Empty("wiring text"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| parse_err(1, format!("{e}"))))
            .collect::<Result<_>>()?;
        let [s, i, c, m] = header[..] else {
            return Err(parse_err(1, "expected four counts".into()));
        };
        let mut w = Self::empty(LayerCounts::new(s, i, c, m))?;
        let n = w.neurons();
        for (row, line) in lines.enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let [src, dst, pol] = f[..] else {
                return Err(parse_err(row + 2, "expected `src dst polarity`".into()));
            };
            let src: usize = src.parse().map_err(|e| parse_err(row + 2, format!("{e}")))?;
            let dst: usize = dst.parse().map_err(|e| parse_err(row + 2, format!("{e}")))?;
            let pol: i8 = pol.parse().map_err(|e| parse_err(row + 2, format!("{e}")))?;
            if !(pol == 1 || pol == -1) || dst < s || dst >= s + n || src >= s + n {
                return Err(parse_err(row + 2, format!("bad synapse {line}")));
            }
            if src < s {
                w.set_sensory_synapse(src, dst - s, pol);
            } else {
                w.set_synapse(src - s, dst - s, pol);
            }
        }
        Ok(w)
    }
}

/// Five seeded phases: sensory fan-out, inter coverage, inter → command with
/// coverage, recurrent command synapses, command → motor with coverage.
/// Every polarity is ±1 with equal probability.
pub fn build_ncp(config: &WiringConfig) -> Result<NcpWiring> {
    config.validate()?;
    let counts = config.counts();
    let mut w = NcpWiring::empty(counts)?;
    let mut rng = Rng::new(config.seed);
    let (inter, command, motor) = (counts.inter_range(), counts.command_range(), counts.motor_range());

    for s in 0..counts.sensory {
        for t in rng.choose_distinct(counts.inter, config.sensory_fanout) {
            let p = rng.sign();
            w.set_sensory_synapse(s, inter.start + t, p);
        }
    }
    for i in inter.clone() {
        if !w.has_sensory_input(i) {
            let s = rng.below(counts.sensory);
            let p = rng.sign();
            w.set_sensory_synapse(s, i, p);
        }
    }

    for i in inter.clone() {
        for t in rng.choose_distinct(counts.command, config.inter_fanout) {
            let p = rng.sign();
            w.set_synapse(i, command.start + t, p);
        }
    }
    for c in command.clone() {
        if !w.has_incoming_from(c, inter.clone()) {
            let i = inter.start + rng.below(counts.inter);
            let p = rng.sign();
            w.set_synapse(i, c, p);
        }
    }

    for pair in rng.choose_distinct(counts.command * counts.command, config.recurrent_command_synapses) {
        let (src, dst) = (pair / counts.command, pair % counts.command);
        let p = rng.sign();
        w.set_synapse(command.start + src, command.start + dst, p);
    }

    for m in motor.clone() {
        for t in rng.choose_distinct(counts.command, config.motor_fanin) {
            let p = rng.sign();
            w.set_synapse(command.start + t, m, p);
        }
    }
    for c in command.clone() {
        if !motor.clone().any(|m| w.synapse(c, m) != 0) {
            let m = motor.start + rng.below(counts.motor);
            let p = rng.sign();
            w.set_synapse(c, m, p);
        }
    }
    Ok(w)
}

/// Every legal synapse present, all excitatory.
pub fn build_fc(sensory: usize, inter: usize, command: usize, motor: usize) -> Result<NcpWiring> {
    let counts = LayerCounts::new(sensory, inter, command, motor);
    let mut w = NcpWiring::empty(counts)?;
    for_each_allowed(counts, |kind, src, dst| match kind {
        Slot::Sensory => w.set_sensory_synapse(src, dst, 1),
        Slot::Unit => w.set_synapse(src, dst, 1),
    });
    Ok(w)
}

/// Each legal synapse kept with probability `density` (random polarity), then
/// any inter, command or motor neuron left without input gets one synapse
/// from a random neuron of the layer below.
pub fn build_random(
    sensory: usize,
    inter: usize,
    command: usize,
    motor: usize,
    density: f64,
    seed: u64,
) -> Result<NcpWiring> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidConfig(format!("density {density} must lie in (0, 1]")));
    }
    let counts = LayerCounts::new(sensory, inter, command, motor);
    let mut w = NcpWiring::empty(counts)?;
    let mut rng = Rng::new(seed);
    for_each_allowed(counts, |kind, src, dst| {
        if rng.bernoulli(density) {
            let p = rng.sign();
            match kind {
                Slot::Sensory => w.set_sensory_synapse(src, dst, p),
                Slot::Unit => w.set_synapse(src, dst, p),
            }
        }
    });
    for i in counts.inter_range() {
        if !w.has_sensory_input(i) {
            let s = rng.below(counts.sensory);
            let p = rng.sign();
            w.set_sensory_synapse(s, i, p);
        }
    }
    let patch = |w: &mut NcpWiring, rng: &mut Rng, targets: Range<usize>, sources: Range<usize>| {
        for t in targets {
            if !w.has_incoming_from(t, sources.clone()) {
                let s = sources.start + rng.below(sources.len());
                let p = rng.sign();
                w.set_synapse(s, t, p);
            }
        }
    };
    patch(&mut w, &mut rng, counts.command_range(), counts.inter_range());
    patch(&mut w, &mut rng, counts.motor_range(), counts.command_range());
    Ok(w)
}

enum Slot {
    Sensory,
    Unit,
}

fn for_each_allowed(counts: LayerCounts, mut f: impl FnMut(Slot, usize, usize)) {
    for s in 0..counts.sensory {
        for i in counts.inter_range() {
            f(Slot::Sensory, s, i);
        }
    }
    for i in counts.inter_range() {
        for c in counts.command_range() {
            f(Slot::Unit, i, c);
        }
    }
    for a in counts.command_range() {
        for b in counts.command_range() {
            f(Slot::Unit, a, b);
        }
    }
    for c in counts.command_range() {
        for m in counts.motor_range() {
            f(Slot::Unit, c, m);
        }
    }
}

fn allowed(src: Layer, dst: Layer) -> bool {
    matches!(
        (src, dst),
        (Layer::Inter, Layer::Command) | (Layer::Command, Layer::Command) | (Layer::Command, Layer::Motor)
    )
}

/// Fraction of legal synapse slots that are empty.
pub fn sparsity(w: &NcpWiring) -> f64 {
    let c = w.counts();
    let present = w
        .sensory_synapses()
        .filter(|&(_, d, _)| c.layer_of(d) == Layer::Inter)
        .count()
        + w.synapses()
            .filter(|&(s, d, _)| allowed(c.layer_of(s), c.layer_of(d)))
            .count();
    1.0 - present as f64 / c.allowed_positions() as f64
}

/// Every broken invariant; empty iff the wiring is valid.
pub fn validate(w: &NcpWiring) -> Vec<Violation> {
    let c = w.counts();
    let mut out = Vec::new();
    for (s, d, _) in w.sensory_synapses() {
        let layer = c.layer_of(d);
        if layer != Layer::Inter {
            out.push(Violation::SensoryInto {
                sensory: s,
                neuron: d,
                layer,
            });
        }
    }
    for (s, d, _) in w.synapses() {
        let (sl, dl) = (c.layer_of(s), c.layer_of(d));
        if !allowed(sl, dl) {
            out.push(Violation::Forbidden {
                src: s,
                src_layer: sl,
                dst: d,
                dst_layer: dl,
            });
        }
    }
    for i in c.inter_range() {
        if !w.has_sensory_input(i) {
            out.push(Violation::Uncovered {
                layer: Layer::Inter,
                neuron: i,
            });
        }
    }
    for n in c.command_range() {
        if !w.has_incoming_from(n, c.inter_range()) {
            out.push(Violation::Uncovered {
                layer: Layer::Command,
                neuron: n,
            });
        }
    }
    for m in c.motor_range() {
        if !w.has_incoming_from(m, c.command_range()) {
            out.push(Violation::Uncovered {
                layer: Layer::Motor,
                neuron: m,
            });
        }
    }
    out
}

/// Whether every motor neuron can be reached from some sensory neuron.
pub fn motors_reachable(w: &NcpWiring) -> bool {
    let n = w.neurons();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = w.sensory_synapses().map(|(_, d, _)| d).collect();
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend((0..n).filter(|&d| w.synapse(v, d) != 0 && !seen[d]));
    }
    w.counts().motor_range().all(|m| seen[m])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_ncp(seed: u64) -> NcpWiring {
        build_ncp(&WiringConfig::new(100, 12, 8, 1, seed)).unwrap()
    }

    #[test]
    fn ncp_counts_and_validity() {
        let w = default_ncp(1);
        assert_eq!(w.neurons(), 21);
        assert!(validate(&w).is_empty());
        assert!(motors_reachable(&w));
    }

    #[test]
    fn ncp_is_deterministic() {
        assert_eq!(default_ncp(5), default_ncp(5));
        assert_ne!(default_ncp(5), default_ncp(6));
    }

    #[test]
    fn fc_has_zero_sparsity_and_random_full_density_matches_it() {
        let fc = build_fc(10, 4, 3, 1).unwrap();
        assert_eq!(sparsity(&fc), 0.0);
        assert!(validate(&fc).is_empty());
        let r = build_random(10, 4, 3, 1, 1.0, 9).unwrap();
        assert!(r.same_support(&fc));
    }

    #[test]
    fn random_wiring_rejects_zero_density_and_is_deterministic() {
        assert!(build_random(10, 4, 3, 1, 0.0, 1).is_err());
        let a = build_random(100, 12, 8, 1, 0.1, 3).unwrap();
        let b = build_random(100, 12, 8, 1, 0.1, 3).unwrap();
        assert_eq!(a, b);
        assert!(validate(&a).is_empty());
    }

    #[test]
    fn oversized_fanout_rejected() {
        let mut cfg = WiringConfig::new(100, 12, 8, 1, 0);
        cfg.inter_fanout = 9;
        assert!(build_ncp(&cfg).is_err());
    }

    #[test]
    fn planted_isolated_command_is_named() {
        let mut w = default_ncp(2);
        let victim = w.counts().command_range().start + 3;
        for i in w.counts().inter_range() {
            w.set_synapse(i, victim, 0);
        }
        let v = validate(&w);
        assert_eq!(
            v,
            vec![Violation::Uncovered {
                layer: Layer::Command,
                neuron: victim
            }]
        );
        assert!(v[0].to_string().contains(&victim.to_string()));
    }

    #[test]
    fn planted_sensory_to_motor_is_flagged() {
        let mut w = default_ncp(3);
        let motor = w.counts().motor_range().start;
        w.set_sensory_synapse(0, motor, 1);
        assert!(validate(&w).iter().any(|v| matches!(
            v,
            Violation::SensoryInto {
                layer: Layer::Motor,
                ..
            }
        )));
    }

    #[test]
    fn small_circuits_get_capped_fanouts() {
        let cfg = WiringConfig::new(100, 3, 5, 1, 0);
        assert_eq!(cfg.sensory_fanout, 2);
        let cfg = WiringConfig::new(100, 5, 3, 1, 0);
        assert_eq!((cfg.inter_fanout, cfg.motor_fanin), (3, 3));
        assert!(validate(&build_ncp(&cfg).unwrap()).is_empty());
    }

    #[test]
    fn text_round_trip() {
        let w = default_ncp(4);
        let text = w.to_text();
        assert!(text.starts_with("100 12 8 1\n"));
        assert_eq!(text.lines().count(), 1 + w.synapse_count() + w.sensory_synapse_count());
        assert_eq!(NcpWiring::from_text(&text).unwrap(), w);
    }
}
