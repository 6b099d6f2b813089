//! Gate-level compiler for pruned thermometer-to-binary encoders.
//!
//! This is the structural counterpart of [`crate::area`]: it builds the
//! actual encoder for a mask, simulates it, and counts cells, so the proxy
//! model and the behavioral digitizer can both be checked against it.
//!
//! Construction, for surviving levels `l_1 < ... < l_k`:
//!
//! * `oh(l_i) = T(l_i) AND NOT T(l_{i+1})`, and `oh(l_k) = T(l_k)`. The
//!   AND-NOT term uses the next *surviving* level, not `l_i + 1`.
//! * output bit `b` is an OR2 tree over `oh(l)` for every `l` with bit `b`
//!   set; an empty tree is constant 0.
//!
//! [`simplify`] folds constants and elides wires. It never shares logic
//! across output bits, so OR2 counts stay per-bit.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::adc::LevelMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And2,
    Or2,
    Inv,
    Const0,
    Wire,
}

impl GateKind {
    pub const ALL: [GateKind; 5] =
        [GateKind::And2, GateKind::Or2, GateKind::Inv, GateKind::Const0, GateKind::Wire];

    fn arity(self) -> usize {
        match self {
            GateKind::And2 | GateKind::Or2 => 2,
            GateKind::Inv | GateKind::Wire => 1,
            GateKind::Const0 => 0,
        }
    }

    fn verilog_primitive(self) -> Option<&'static str> {
        match self {
            GateKind::And2 => Some("and"),
            GateKind::Or2 => Some("or"),
            GateKind::Inv => Some("not"),
            GateKind::Const0 | GateKind::Wire => None,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::And2 => "AND2",
            GateKind::Or2 => "OR2",
            GateKind::Inv => "INV",
            GateKind::Const0 => "CONST0",
            GateKind::Wire => "WIRE",
        };
        f.write_str(s)
    }
}

/// A net driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// Thermometer line, index into [`Netlist::inputs`].
    Input(usize),
    /// Output of gate `i`; always refers to an earlier gate.
    Gate(usize),
    Const(bool),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<Signal>,
    /// Net name of the output.
    pub name: String,
}

/// Encoder netlist for one pruned ADC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    mask: LevelMask,
    /// Surviving level behind each thermometer input.
    inputs: Vec<usize>,
    gates: Vec<Gate>,
    /// One driver per output bit, LSB first.
    outputs: Vec<Signal>,
}

pub type GateCounts = BTreeMap<GateKind, usize>;

impl Netlist {
    pub fn bitwidth(&self) -> u32 {
        self.mask.bitwidth()
    }

    pub fn mask(&self) -> &LevelMask {
        &self.mask
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Signal] {
        &self.outputs
    }

    pub fn input_name(&self, idx: usize) -> String {
        format!("t{}", self.inputs[idx])
    }

    fn net_name(&self, sig: Signal, const_names: (&str, &str)) -> String {
        match sig {
            Signal::Input(i) => self.input_name(i),
            Signal::Gate(g) => self.gates[g].name.clone(),
            Signal::Const(false) => const_names.0.to_string(),
            Signal::Const(true) => const_names.1.to_string(),
        }
    }

    /// Checks the structural invariants: arity, acyclicity, reference ranges.
    pub fn validate(&self) -> Result<()> {
        let check = |sig: Signal, limit: usize, ctx: &str| -> Result<()> {
            match sig {
                Signal::Input(i) if i >= self.inputs.len() => {
                    Err(Error::InvalidConfig(format!("{ctx}: input {i} out of range")))
                }
                Signal::Gate(g) if g >= limit => {
                    Err(Error::InvalidConfig(format!("{ctx}: gate {g} is not an earlier gate")))
                }
                _ => Ok(()),
            }
        };
        for (i, gate) in self.gates.iter().enumerate() {
            if gate.inputs.len() != gate.kind.arity() {
                return Err(Error::InvalidConfig(format!("gate {i} ({}) has wrong arity", gate.kind)));
            }
            for &sig in &gate.inputs {
                check(sig, i, &format!("gate {i}"))?;
            }
        }
        if self.outputs.len() != self.bitwidth() as usize {
            return Err(Error::InvalidConfig("output count differs from bitwidth".into()));
        }
        for &sig in &self.outputs {
            check(sig, self.gates.len(), "output")?;
        }
        Ok(())
    }
}

struct Builder {
    gates: Vec<Gate>,
}

impl Builder {
    fn push(&mut self, kind: GateKind, inputs: Vec<Signal>, name: String) -> Signal {
        self.gates.push(Gate { kind, inputs, name });
        Signal::Gate(self.gates.len() - 1)
    }

    fn or_tree(&mut self, bit: u32, mut leaves: Vec<Signal>) -> Signal {
        match leaves.len() {
            0 => return self.push(GateKind::Const0, vec![], format!("zero{bit}")),
            1 => return self.push(GateKind::Wire, leaves, format!("w{bit}")),
            _ => {}
        }
        let mut serial = 0;
        while leaves.len() > 1 {
            let mut next = Vec::with_capacity(leaves.len().div_ceil(2));
            for pair in leaves.chunks(2) {
                if let [a, b] = *pair {
                    next.push(self.push(GateKind::Or2, vec![a, b], format!("or{bit}_{serial}")));
                    serial += 1;
                } else {
                    next.push(pair[0]);
                }
            }
            leaves = next;
        }
        leaves[0]
    }
}

/// Builds the encoder without simplification (WIRE and CONST0 cells kept).
pub fn compile_encoder_raw(mask: &LevelMask) -> Netlist {
    let inputs: Vec<usize> = mask.levels().collect();
    let mut b = Builder { gates: Vec::new() };
    let mut onehot: Vec<(usize, Signal)> = Vec::with_capacity(inputs.len());
    for (i, &level) in inputs.iter().enumerate() {
        let sig = match inputs.get(i + 1) {
            Some(&above) => {
                let inv = b.push(GateKind::Inv, vec![Signal::Input(i + 1)], format!("nt{above}"));
                b.push(GateKind::And2, vec![Signal::Input(i), inv], format!("oh{level}"))
            }
            None => b.push(GateKind::Wire, vec![Signal::Input(i)], format!("oh{level}")),
        };
        onehot.push((level, sig));
    }
    let outputs = (0..mask.bitwidth())
        .map(|bit| {
            let leaves = onehot.iter().filter(|(l, _)| l >> bit & 1 == 1).map(|&(_, s)| s).collect();
            b.or_tree(bit, leaves)
        })
        .collect();
    Netlist { mask: *mask, inputs, gates: b.gates, outputs }
}

/// Compiles and simplifies the encoder for `mask`.
pub fn compile_encoder(mask: &LevelMask) -> Netlist {
    simplify(&compile_encoder_raw(mask))
}

/// Like [`compile_encoder`], for a mask given as raw per-level booleans.
pub fn compile_encoder_bools(bitwidth: u32, levels: &[bool]) -> Result<Netlist> {
    Ok(compile_encoder(&LevelMask::from_bools(bitwidth, levels)?))
}

/// Constant propagation, wire elision and dead-cell removal.
pub fn simplify(net: &Netlist) -> Netlist {
    let mut resolved: Vec<Signal> = Vec::with_capacity(net.gates.len());
    let mut kept: Vec<Gate> = Vec::new();
    let remap = |resolved: &[Signal], s: Signal| match s {
        Signal::Gate(g) => resolved[g],
        other => other,
    };
    for gate in &net.gates {
        let ins: Vec<Signal> = gate.inputs.iter().map(|&s| remap(&resolved, s)).collect();
        let folded = match gate.kind {
            GateKind::Wire => Some(ins[0]),
            GateKind::Const0 => Some(Signal::Const(false)),
            GateKind::Inv => match ins[0] {
                Signal::Const(v) => Some(Signal::Const(!v)),
                _ => None,
            },
            GateKind::And2 => match (ins[0], ins[1]) {
                (Signal::Const(false), _) | (_, Signal::Const(false)) => Some(Signal::Const(false)),
                (Signal::Const(true), x) | (x, Signal::Const(true)) => Some(x),
                _ => None,
            },
            GateKind::Or2 => match (ins[0], ins[1]) {
                (Signal::Const(true), _) | (_, Signal::Const(true)) => Some(Signal::Const(true)),
                (Signal::Const(false), x) | (x, Signal::Const(false)) => Some(x),
                _ => None,
            },
        };
        let sig = folded.unwrap_or_else(|| {
            kept.push(Gate { kind: gate.kind, inputs: ins, name: gate.name.clone() });
            Signal::Gate(kept.len() - 1)
        });
        resolved.push(sig);
    }
    let outputs: Vec<Signal> = net.outputs.iter().map(|&s| remap(&resolved, s)).collect();

    // Drop cells that no output depends on.
    let mut live = vec![false; kept.len()];
    let mut stack: Vec<usize> = outputs
        .iter()
        .filter_map(|s| if let Signal::Gate(g) = s { Some(*g) } else { None })
        .collect();
    while let Some(g) = stack.pop() {
        if std::mem::replace(&mut live[g], true) {
            continue;
        }
        for s in &kept[g].inputs {
            if let Signal::Gate(d) = s {
                stack.push(*d);
            }
        }
    }
    let mut new_index = vec![usize::MAX; kept.len()];
    let mut gates = Vec::with_capacity(kept.len());
    for (i, gate) in kept.into_iter().enumerate() {
        if live[i] {
            new_index[i] = gates.len();
            let inputs = gate
                .inputs
                .iter()
                .map(|&s| match s {
                    Signal::Gate(d) => Signal::Gate(new_index[d]),
                    other => other,
                })
                .collect();
            gates.push(Gate { inputs, ..gate });
        }
    }
    let outputs = outputs
        .into_iter()
        .map(|s| match s {
            Signal::Gate(d) => Signal::Gate(new_index[d]),
            other => other,
        })
        .collect();
    Netlist { mask: net.mask, inputs: net.inputs.clone(), gates, outputs }
}

/// Evaluates the netlist on a thermometer pattern over its inputs.
pub fn simulate(net: &Netlist, thermometer: &[bool]) -> Result<u32> {
    if thermometer.len() != net.inputs.len() {
        return Err(Error::InvalidThermometer(format!(
            "expected {} lines, got {}",
            net.inputs.len(),
            thermometer.len()
        )));
    }
    if let Some(pos) = thermometer.windows(2).position(|w| !w[0] && w[1]) {
        return Err(Error::InvalidThermometer(format!(
            "line {} is high above low line {}",
            pos + 1,
            pos
        )));
    }
    let mut values = Vec::with_capacity(net.gates.len());
    let read = |values: &[bool], s: Signal| match s {
        Signal::Input(i) => thermometer[i],
        Signal::Gate(g) => values[g],
        Signal::Const(v) => v,
    };
    for gate in &net.gates {
        let v = match gate.kind {
            GateKind::And2 => read(&values, gate.inputs[0]) && read(&values, gate.inputs[1]),
            GateKind::Or2 => read(&values, gate.inputs[0]) || read(&values, gate.inputs[1]),
            GateKind::Inv => !read(&values, gate.inputs[0]),
            GateKind::Wire => read(&values, gate.inputs[0]),
            GateKind::Const0 => false,
        };
        values.push(v);
    }
    Ok(net
        .outputs
        .iter()
        .enumerate()
        .fold(0u32, |code, (bit, &s)| code | (read(&values, s) as u32) << bit))
}

/// Cells by kind. Every kind is present, possibly with a zero count.
pub fn count_gates(net: &Netlist) -> GateCounts {
    let mut counts: GateCounts = GateKind::ALL.iter().map(|&k| (k, 0)).collect();
    for gate in &net.gates {
        *counts.entry(gate.kind).or_default() += 1;
    }
    counts
}

/// AND2 + OR2 + INV cells.
pub fn logic_gate_total(counts: &GateCounts) -> usize {
    [GateKind::And2, GateKind::Or2, GateKind::Inv]
        .iter()
        .map(|k| counts.get(k).copied().unwrap_or(0))
        .sum()
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Structural Verilog for the netlist.
///
/// Format, one item per line:
///
/// ```text
/// // <N>-bit pruned flash ADC encoder, mask <HEX>
/// module <name> (
///     input  wire t<level>,        one per surviving level, ascending
///     output wire [<N-1>:0] code
/// );
///     wire <net>;                  one per gate, in gate order
///     <not|and|or> g<i> (<out>, <in>[, <in>]);
///     assign code[<b>] = <net|1'b0|1'b1>;
/// endmodule
/// ```
pub fn emit_hdl(net: &Netlist, module_name: &str) -> Result<String> {
    if !valid_identifier(module_name) {
        return Err(Error::InvalidConfig(format!("'{module_name}' is not a valid module name")));
    }
    net.validate()?;
    if let Some(g) = net.gates.iter().find(|g| g.kind.verilog_primitive().is_none()) {
        return Err(Error::InvalidConfig(format!("{} cell '{}' must be simplified away", g.kind, g.name)));
    }
    let consts = ("1'b0", "1'b1");
    let n = net.bitwidth();
    let mut out = String::new();
    let _ = writeln!(out, "// {n}-bit pruned flash ADC encoder, mask {}", net.mask.to_hex());
    let _ = writeln!(out, "module {module_name} (");
    for i in 0..net.inputs.len() {
        let _ = writeln!(out, "    input  wire {},", net.input_name(i));
    }
    let _ = writeln!(out, "    output wire [{}:0] code", n - 1);
    let _ = writeln!(out, ");");
    for gate in &net.gates {
        let _ = writeln!(out, "    wire {};", gate.name);
    }
    for (i, gate) in net.gates.iter().enumerate() {
        let prim = gate.kind.verilog_primitive().unwrap_or_default();
        let ins: Vec<String> = gate.inputs.iter().map(|&s| net.net_name(s, consts)).collect();
        let _ = writeln!(out, "    {prim} g{i} ({}, {});", gate.name, ins.join(", "));
    }
    for (bit, &s) in net.outputs.iter().enumerate() {
        let _ = writeln!(out, "    assign code[{bit}] = {};", net.net_name(s, consts));
    }
    out.push_str("endmodule\n");
    Ok(out)
}

/// Counts of primitive instances and thermometer inputs recovered from text
/// produced by [`emit_hdl`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HdlSummary {
    pub inputs: usize,
    pub gates: GateCounts,
}

pub fn parse_hdl_summary(text: &str) -> HdlSummary {
    let mut summary = HdlSummary {
        inputs: 0,
        gates: [GateKind::And2, GateKind::Or2, GateKind::Inv].iter().map(|&k| (k, 0)).collect(),
    };
    for line in text.lines().map(str::trim) {
        if line.starts_with("input ") {
            summary.inputs += 1;
            continue;
        }
        let kind = match line.split_whitespace().next() {
            Some("and") => GateKind::And2,
            Some("or") => GateKind::Or2,
            Some("not") => GateKind::Inv,
            _ => continue,
        };
        *summary.gates.entry(kind).or_default() += 1;
    }
    summary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateJson {
    pub kind: GateKind,
    #[serde(rename = "in")]
    pub inputs: Vec<String>,
    pub out: String,
}

/// JSON form: `{bitwidth, mask_hex, inputs, gates: [{kind, in, out}], outputs}`.
/// Constants are spelled `const0` / `const1`; `outputs` is LSB first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetlistJson {
    pub bitwidth: u32,
    pub mask_hex: String,
    pub inputs: Vec<String>,
    pub gates: Vec<GateJson>,
    pub outputs: Vec<String>,
}

pub fn to_json(net: &Netlist) -> NetlistJson {
    let consts = ("const0", "const1");
    NetlistJson {
        bitwidth: net.bitwidth(),
        mask_hex: net.mask.to_hex(),
        inputs: (0..net.inputs.len()).map(|i| net.input_name(i)).collect(),
        gates: net
            .gates
            .iter()
            .map(|g| GateJson {
                kind: g.kind,
                inputs: g.inputs.iter().map(|&s| net.net_name(s, consts)).collect(),
                out: g.name.clone(),
            })
            .collect(),
        outputs: net.outputs.iter().map(|&s| net.net_name(s, consts)).collect(),
    }
}
