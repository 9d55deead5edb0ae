//! Reader for a subset of the GasLib XML network and scenario formats.
//!
//! Only the fields this model uses are read: node pressure bounds, pipe
//! length and diameter, flow bounds, and the compressor and control-valve
//! ratio limits when present as `kappaMin`/`kappaMax` children. Units are
//! taken as km for lengths and bar for pressures. Flows are read as given
//! without unit conversion.

use std::collections::BTreeMap;

use roxmltree::{Document, Node as XmlNode};

use crate::error::{Error, Result};
use crate::model::{physics, ActiveLimits, Arc, ArcKind, Network, Node, Nomination};

/// Compressor ratio limit used when a station gives none (a pressure ratio of 2).
pub const DEFAULT_COMPRESSOR_KAPPA_MAX: f64 = 4.0;
/// Control-valve ratio range used when none is given.
pub const DEFAULT_CONTROL_VALVE_KAPPA: (f64, f64) = (0.25, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRole {
    Source,
    Sink,
    Innode,
}

#[derive(Debug, Clone)]
pub struct GaslibNetwork {
    pub network: Network,
    pub roles: BTreeMap<String, NodeRole>,
}

impl GaslibNetwork {
    pub fn count(&self, role: NodeRole) -> usize {
        self.roles.values().filter(|r| **r == role).count()
    }
}

fn xml_err(origin: &str, msg: impl Into<String>) -> Error {
    Error::Schema { path: origin.to_string(), message: msg.into() }
}

fn child<'a>(n: XmlNode<'a, 'a>, name: &str) -> Option<XmlNode<'a, 'a>> {
    n.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn value(origin: &str, n: XmlNode, name: &str) -> Result<Option<f64>> {
    let Some(c) = child(n, name) else { return Ok(None) };
    let raw = c.attribute("value").ok_or_else(|| xml_err(origin, format!("<{name}> lacks a value attribute")))?;
    let v: f64 = raw.trim().parse().map_err(|_| xml_err(origin, format!("<{name}> value {raw:?} is not a number")))?;
    let scale = match (name, c.attribute("unit")) {
        ("length", Some("m")) => 1.0,
        ("length", _) => 1000.0,
        ("diameter", Some("m")) => 1000.0,
        _ => 1.0,
    };
    Ok(Some(v * scale))
}

fn required(origin: &str, n: XmlNode, name: &str) -> Result<f64> {
    let id = n.attribute("id").unwrap_or("?");
    value(origin, n, name)?.ok_or_else(|| xml_err(origin, format!("{} {id} lacks <{name}>", n.tag_name().name())))
}

fn attr<'a>(origin: &str, n: XmlNode<'a, 'a>, name: &str) -> Result<&'a str> {
    n.attribute(name).ok_or_else(|| xml_err(origin, format!("<{}> lacks attribute {name}", n.tag_name().name())))
}

fn flow_cap(origin: &str, n: XmlNode) -> Result<f64> {
    let lo = value(origin, n, "flowMin")?.unwrap_or(0.0);
    let hi = value(origin, n, "flowMax")?;
    match hi {
        Some(h) => Ok(h.abs().max(lo.abs())),
        None => Err(xml_err(origin, format!("{} {} lacks <flowMax>", n.tag_name().name(), n.attribute("id").unwrap_or("?")))),
    }
}

/// Parses a GasLib `.net` document.
pub fn read_gaslib_network(origin: &str, xml: &str) -> Result<GaslibNetwork> {
    let doc = Document::parse(xml).map_err(|e| xml_err(origin, e.to_string()))?;
    let root = doc.root_element();
    let name = root
        .descendants()
        .find(|n| n.tag_name().name() == "title")
        .and_then(|n| n.text())
        .map(|t| t.trim().to_string())
        .unwrap_or_else(|| origin.to_string());
    let mut nodes = Vec::new();
    let mut roles = BTreeMap::new();
    let mut arcs = Vec::new();
    for section in root.children().filter(|c| c.is_element()) {
        match section.tag_name().name() {
            "nodes" => {
                for n in section.children().filter(|c| c.is_element()) {
                    let role = match n.tag_name().name() {
                        "source" => NodeRole::Source,
                        "sink" => NodeRole::Sink,
                        "innode" => NodeRole::Innode,
                        other => return Err(xml_err(origin, format!("unknown node kind <{other}>"))),
                    };
                    let id = attr(origin, n, "id")?.to_string();
                    let pmin = value(origin, n, "pressureMin")?.unwrap_or(0.0);
                    let pmax = value(origin, n, "pressureMax")?;
                    let pi_max = pmax.map_or(f64::INFINITY, physics::potential_of);
                    nodes.push(Node::new(id.clone(), 0.0, physics::potential_of(pmin), pi_max));
                    roles.insert(id, role);
                }
            }
            "connections" => {
                for c in section.children().filter(|c| c.is_element()) {
                    let id = attr(origin, c, "id")?;
                    let from = attr(origin, c, "from")?;
                    let to = attr(origin, c, "to")?;
                    let kind = match c.tag_name().name() {
                        "pipe" => ArcKind::Pipe {
                            length: required(origin, c, "length")?,
                            diameter: Some(required(origin, c, "diameter")?),
                            candidates: Vec::new(),
                        },
                        "shortPipe" => ArcKind::ShortPipe { q_max: flow_cap(origin, c)? },
                        "resistor" => {
                            let alpha = match value(origin, c, "alpha")? {
                                Some(a) => a,
                                None => required(origin, c, "dragFactor")?,
                            };
                            ArcKind::Resistor { alpha, q_max: flow_cap(origin, c)? }
                        }
                        "valve" => ArcKind::Valve { q_max: flow_cap(origin, c)? },
                        "compressorStation" => ArcKind::Compressor(ActiveLimits {
                            kappa_min: value(origin, c, "kappaMin")?.unwrap_or(1.0),
                            kappa_max: value(origin, c, "kappaMax")?.unwrap_or(DEFAULT_COMPRESSOR_KAPPA_MAX),
                            q_max: flow_cap(origin, c)?,
                            pi_min_on: value(origin, c, "pressureInMin")?.map(physics::potential_of),
                            pi_max_on: value(origin, c, "pressureOutMax")?.map(physics::potential_of),
                        }),
                        "controlValve" => ArcKind::ControlValve(ActiveLimits {
                            kappa_min: value(origin, c, "kappaMin")?.unwrap_or(DEFAULT_CONTROL_VALVE_KAPPA.0),
                            kappa_max: value(origin, c, "kappaMax")?.unwrap_or(DEFAULT_CONTROL_VALVE_KAPPA.1),
                            q_max: flow_cap(origin, c)?,
                            pi_min_on: value(origin, c, "pressureInMin")?.map(physics::potential_of),
                            pi_max_on: value(origin, c, "pressureOutMax")?.map(physics::potential_of),
                        }),
                        other => return Err(xml_err(origin, format!("unsupported connection <{other}>"))),
                    };
                    arcs.push(Arc::new(id, from, to, kind));
                }
            }
            _ => {}
        }
    }
    let network = Network::new(name, nodes, arcs)?;
    Ok(GaslibNetwork { network, roles })
}

/// Parses a GasLib `.scn` scenario. Entries are sources (negative demand)
/// and exits are sinks. A `both` bound is used as is; otherwise the
/// midpoint of the lower and upper bounds.
pub fn read_gaslib_nomination(origin: &str, xml: &str) -> Result<Nomination> {
    let doc = Document::parse(xml).map_err(|e| xml_err(origin, e.to_string()))?;
    let scenario = doc
        .descendants()
        .find(|n| n.tag_name().name() == "scenario")
        .ok_or_else(|| xml_err(origin, "no <scenario> element"))?;
    let name = scenario.attribute("id").unwrap_or(origin).to_string();
    let mut demands = BTreeMap::new();
    for n in scenario.children().filter(|c| c.is_element() && c.tag_name().name() == "node") {
        let id = attr(origin, n, "id")?;
        let sign = match attr(origin, n, "type")? {
            "entry" => -1.0,
            "exit" => 1.0,
            other => return Err(xml_err(origin, format!("node {id}: unknown type {other:?}"))),
        };
        let (mut both, mut lo, mut hi) = (None, None, None);
        for f in n.children().filter(|c| c.is_element() && c.tag_name().name() == "flow") {
            let raw = attr(origin, f, "value")?;
            let v: f64 = raw.trim().parse().map_err(|_| xml_err(origin, format!("node {id}: bad flow {raw:?}")))?;
            match f.attribute("bound").unwrap_or("both") {
                "lower" => lo = Some(v),
                "upper" => hi = Some(v),
                _ => both = Some(v),
            }
        }
        let v = match (both, lo, hi) {
            (Some(b), _, _) => b,
            (None, Some(l), Some(h)) => 0.5 * (l + h),
            (None, Some(x), None) | (None, None, Some(x)) => x,
            _ => return Err(xml_err(origin, format!("node {id} has no <flow>"))),
        };
        demands.insert(id.to_string(), sign * v);
    }
    let nom = Nomination { name, demands };
    nom.check_balanced()?;
    Ok(nom)
}
