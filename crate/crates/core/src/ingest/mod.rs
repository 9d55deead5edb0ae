//! File formats and instance generation.
//!
//! Canonical documents are JSON with a top-level `"format": 1`. Three kinds
//! exist: network, nomination and instance. A non-canonical reader for a
//! GasLib XML subset lives in [`gaslib`].

mod gaslib;
mod synthetic;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use gaslib::{read_gaslib_network, read_gaslib_nomination, GaslibNetwork, NodeRole};
pub use synthetic::{generate_synthetic, ComponentMix, Synthetic};

use crate::error::{Error, Result};
use crate::model::{physics, Arc, ArcKind, DesignAssignment, Instance, Network, Node, Nomination, PhysicsConstants, PipeCandidate};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MULTIPLIERS: [f64; 4] = [0.8, 1.0, 1.3, 1.5];
pub const STRESS_LEVELS: [f64; 5] = [0.1, 0.5, 1.0, 1.5, 2.0];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    format: u32,
    name: String,
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NominationDoc {
    format: u32,
    name: String,
    demands: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    format: u32,
    name: String,
    network: NetworkBody,
    nomination: NominationBody,
    stress: f64,
    #[serde(default)]
    diameter_multipliers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<DesignAssignment>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkBody {
    name: String,
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NominationBody {
    name: String,
    demands: std::collections::BTreeMap<String, f64>,
}

/// Recipe for one benchmark instance: which network and nomination to load
/// and how to perturb them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub network: String,
    pub nomination: String,
    pub stress: f64,
    #[serde(default = "default_multipliers")]
    pub diameter_multipliers: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_multipliers() -> Vec<f64> {
    DEFAULT_MULTIPLIERS.to_vec()
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        check_stress(self.stress)?;
        check_multipliers(&self.diameter_multipliers)?;
        if self.diameter_multipliers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("diameter multipliers must be distinct and sorted ascending"));
        }
        Ok(())
    }

    /// Loads both documents, applies the stress and expands diameters.
    pub fn build(&self, physics: &PhysicsConstants) -> Result<Instance> {
        self.validate()?;
        let net = load_network(&self.network)?;
        let nom = load_nomination(&self.nomination)?;
        let net = expand_diameters(&net, &self.diameter_multipliers, physics)?;
        let nom = apply_stress(&nom, self.stress)?;
        let name = format!("{}-s{}", net.name(), self.stress);
        let mut inst = Instance::new(name, net, nom)?;
        inst.stress = self.stress;
        inst.diameter_multipliers = self.diameter_multipliers.clone();
        inst.seed = self.seed;
        Ok(inst)
    }
}

fn schema_err(path: &str, e: serde_json::Error) -> Error {
    Error::Schema { path: path.to_string(), message: e.to_string() }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn parse<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| schema_err(origin, e))?;
    match value.get("format").and_then(|f| f.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Schema { path: origin.into(), message: format!("unsupported format version {v}") })
        }
        None => return Err(Error::Schema { path: origin.into(), message: "missing field `format`".into() }),
    }
    serde_json::from_str(text).map_err(|e| schema_err(origin, e))
}

fn to_text<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn network_from_str(text: &str) -> Result<Network> {
    let doc: NetworkDoc = parse("<network>", text)?;
    Network::new(doc.name, doc.nodes, doc.arcs)
}

pub fn network_to_string(net: &Network) -> String {
    to_text(&NetworkDoc { format: FORMAT_VERSION, name: net.name().into(), nodes: net.nodes().to_vec(), arcs: net.arcs().to_vec() })
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = read(path)?;
    network_from_str(&text).map_err(|e| relocate(e, path))
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &network_to_string(net))
}

pub fn nomination_from_str(text: &str) -> Result<Nomination> {
    let doc: NominationDoc = parse("<nomination>", text)?;
    let nom = Nomination { name: doc.name, demands: doc.demands };
    nom.check_balanced()?;
    Ok(nom)
}

pub fn nomination_to_string(nom: &Nomination) -> String {
    to_text(&NominationDoc { format: FORMAT_VERSION, name: nom.name.clone(), demands: nom.demands.clone() })
}

pub fn load_nomination(path: impl AsRef<Path>) -> Result<Nomination> {
    let path = path.as_ref();
    let text = read(path)?;
    nomination_from_str(&text).map_err(|e| relocate(e, path))
}

pub fn save_nomination(nom: &Nomination, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &nomination_to_string(nom))
}

pub fn instance_from_str(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = parse("<instance>", text)?;
    let net = Network::new(doc.network.name, doc.network.nodes, doc.network.arcs)?;
    let nom = Nomination { name: doc.nomination.name, demands: doc.nomination.demands };
    check_stress(doc.stress)?;
    let mut inst = Instance::new(doc.name, net, nom)?;
    inst.stress = doc.stress;
    inst.diameter_multipliers = doc.diameter_multipliers;
    inst.seed = doc.seed;
    if let Some(w) = &doc.witness {
        w.check(inst.net(), false)?;
    }
    inst.witness = doc.witness;
    Ok(inst)
}

pub fn instance_to_string(inst: &Instance) -> String {
    let net = inst.net();
    to_text(&InstanceDoc {
        format: FORMAT_VERSION,
        name: inst.name.clone(),
        network: NetworkBody { name: net.name().into(), nodes: net.nodes().to_vec(), arcs: net.arcs().to_vec() },
        nomination: NominationBody { name: inst.nomination.name.clone(), demands: inst.nomination.demands.clone() },
        stress: inst.stress,
        diameter_multipliers: inst.diameter_multipliers.clone(),
        seed: inst.seed,
        witness: inst.witness.clone(),
    })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = read(path)?;
    instance_from_str(&text).map_err(|e| relocate(e, path))
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &instance_to_string(inst))
}

pub fn load_assignment(path: impl AsRef<Path>) -> Result<DesignAssignment> {
    let path = path.as_ref();
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| schema_err(&path.display().to_string(), e))
}

pub fn save_assignment(a: &DesignAssignment, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &to_text(a))
}

fn relocate(e: Error, path: &Path) -> Error {
    match e {
        Error::Schema { message, .. } => Error::Schema { path: path.display().to_string(), message },
        other => other,
    }
}

pub fn check_stress(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("stress must be positive, got {s}")));
    }
    Ok(())
}

pub fn check_multipliers(m: &[f64]) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid("at least one diameter multiplier is required"));
    }
    if let Some(bad) = m.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("diameter multiplier must be positive, got {bad}")));
    }
    Ok(())
}

/// Scales every demand by `s`. Balance is preserved up to rounding.
pub fn apply_stress(nom: &Nomination, s: f64) -> Result<Nomination> {
    check_stress(s)?;
    let demands = nom.demands.iter().map(|(k, d)| (k.clone(), d * s)).collect();
    Ok(Nomination { name: nom.name.clone(), demands })
}

/// Replaces each pipe's candidate list with one candidate per multiplier of
/// its base diameter. Multipliers are sorted and deduplicated first, so the
/// candidate order is by increasing diameter.
pub fn expand_diameters(net: &Network, multipliers: &[f64], phys: &PhysicsConstants) -> Result<Network> {
    check_multipliers(multipliers)?;
    let mut ms = multipliers.to_vec();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    let mut out = net.clone();
    for &p in net.pipes() {
        let arc = net.arc(p);
        let ArcKind::Pipe { length, diameter, .. } = arc.kind else { unreachable!() };
        let base = diameter.ok_or_else(|| Error::invalid(format!("pipe {} has no base diameter", arc.id)))?;
        let candidates = ms
            .iter()
            .map(|m| {
                let d = base * m;
                Ok(PipeCandidate {
                    diameter: d,
                    alpha: physics::loss_coefficient(length, d, phys.c_alpha)?,
                    q_max: physics::max_flow(d, phys.c_q)?,
                    cost: physics::pipe_cost(length, d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out = out.with_arc_kind(p, ArcKind::Pipe { length, diameter, candidates })?;
    }
    Ok(out)
}
