//! Structural export of the MCLA as a flat AND/OR/XOR netlist, plus a small
//! interpreter used to check the export against the behavioral model.
//!
//! Text format (UTF-8, LF):
//!
//! ```text
//! input a0 a1 ... b0 ... c0
//! output s0 ... cout
//! xor p0 a0 b0
//! and g0 a0 b0
//! ...
//! ```
//!
//! One gate per line as `<kind> <out> <in1> [<in2> ...]`. Gates appear in
//! topological order.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fixed_point::FixedWord;
use crate::mcla::AddResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Xor,
}

impl GateKind {
    fn keyword(self) -> &'static str {
        match self {
            GateKind::And => "and",
            GateKind::Or => "or",
            GateKind::Xor => "xor",
        }
    }

    fn eval(self, mut inputs: impl Iterator<Item = bool>) -> bool {
        match self {
            GateKind::And => inputs.all(|b| b),
            GateKind::Or => inputs.any(|b| b),
            GateKind::Xor => inputs.fold(false, |acc, b| acc ^ b),
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(GateKind::And),
            "or" => Ok(GateKind::Or),
            "xor" => Ok(GateKind::Xor),
            other => Err(Error::Config(format!("unknown gate kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub output: String,
    pub inputs: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Netlist {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<Gate>,
}

struct Builder {
    net: Netlist,
}

impl Builder {
    fn gate(&mut self, kind: GateKind, output: impl Into<String>, inputs: &[&str]) -> String {
        let output = output.into();
        self.net.gates.push(Gate {
            kind,
            output: output.clone(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        });
        output
    }

    /// OR of AND terms; single-literal terms are used directly.
    fn sum_of_products(&mut self, output: String, terms: &[Vec<&str>]) -> String {
        let mut names = Vec::with_capacity(terms.len());
        for (j, term) in terms.iter().enumerate() {
            if term.len() == 1 {
                names.push(term[0].to_string());
            } else {
                names.push(self.gate(GateKind::And, format!("{output}_t{j}"), term));
            }
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        self.gate(GateKind::Or, output, &refs)
    }
}

/// Emits the block-chained MCLA for `width` bits (a multiple of 4, ≤ 64).
///
/// Within each block the carries `c1..c3` come from the flat look-ahead
/// equations; the block carry out is formed from the group signals as
/// `G_G | (P_G & c_in)` and feeds the next block.
pub fn emit_netlist(width: u32) -> Result<Netlist> {
    if width == 0 || !width.is_multiple_of(4) || width > 64 {
        return Err(Error::Config(format!(
            "netlist width must be a positive multiple of 4 up to 64, got {width}"
        )));
    }
    let mut b = Builder {
        net: Netlist::default(),
    };
    b.net.inputs = (0..width)
        .map(|i| format!("a{i}"))
        .chain((0..width).map(|i| format!("b{i}")))
        .chain(["c0".to_string()])
        .collect();
    b.net.outputs = (0..width)
        .map(|i| format!("s{i}"))
        .chain(["cout".to_string()])
        .collect();

    for i in 0..width {
        let (a, bb) = (format!("a{i}"), format!("b{i}"));
        b.gate(GateKind::Xor, format!("p{i}"), &[&a, &bb]);
        b.gate(GateKind::And, format!("g{i}"), &[&a, &bb]);
    }

    let blocks = width / 4;
    let mut cin = "c0".to_string();
    for k in 0..blocks {
        let base = 4 * k;
        let p: Vec<String> = (base..base + 4).map(|i| format!("p{i}")).collect();
        let g: Vec<String> = (base..base + 4).map(|i| format!("g{i}")).collect();
        let (p0, p1, p2, p3) = (&*p[0], &*p[1], &*p[2], &*p[3]);
        let (g0, g1, g2, g3) = (&*g[0], &*g[1], &*g[2], &*g[3]);
        let c0 = cin.as_str();

        let pg = b.gate(GateKind::And, format!("PG{k}"), &[p3, p2, p1, p0]);
        let gg = b.sum_of_products(
            format!("GG{k}"),
            &[
                vec![g3],
                vec![p3, g2],
                vec![p3, p2, g1],
                vec![p3, p2, p1, g0],
            ],
        );

        let c1 = b.sum_of_products(format!("c{}", base + 1), &[vec![g0], vec![p0, c0]]);
        let c2 = b.sum_of_products(
            format!("c{}", base + 2),
            &[vec![g1], vec![p1, g0], vec![p1, p0, c0]],
        );
        let c3 = b.sum_of_products(
            format!("c{}", base + 3),
            &[
                vec![g2],
                vec![p2, g1],
                vec![p2, p1, g0],
                vec![p2, p1, p0, c0],
            ],
        );

        let carries = [c0.to_string(), c1, c2, c3];
        for (i, c) in carries.iter().enumerate() {
            b.gate(GateKind::Xor, format!("s{}", base + i as u32), &[&p[i], c]);
        }

        let pc = b.gate(GateKind::And, format!("PC{k}"), &[&pg, c0]);
        let cout = if k + 1 == blocks {
            "cout".to_string()
        } else {
            format!("c{}", base + 4)
        };
        cin = b.gate(GateKind::Or, cout, &[&gg, &pc]);
    }
    Ok(b.net)
}

impl Netlist {
    /// Number of 4-bit blocks that expose a group propagate signal.
    pub fn group_block_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.output.starts_with("PG"))
            .count()
    }

    pub fn compile(&self) -> Result<CompiledNetlist> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for name in &self.inputs {
            if index.insert(name.as_str(), index.len()).is_some() {
                return Err(Error::Config(format!("duplicate input '{name}'")));
            }
        }
        let mut gates = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            let inputs = gate
                .inputs
                .iter()
                .map(|n| {
                    index.get(n.as_str()).copied().ok_or_else(|| {
                        Error::Config(format!(
                            "gate '{}' reads '{}' before it is driven",
                            gate.output, n
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if inputs.is_empty() {
                return Err(Error::Config(format!(
                    "gate '{}' has no inputs",
                    gate.output
                )));
            }
            let out = index.len();
            if index.insert(gate.output.as_str(), out).is_some() {
                return Err(Error::Config(format!(
                    "signal '{}' driven twice",
                    gate.output
                )));
            }
            gates.push((gate.kind, inputs, out));
        }
        let outputs = self
            .outputs
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::Config(format!("output '{n}' is never driven")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledNetlist {
            signals: index.len(),
            inputs: self.inputs.len(),
            gates,
            outputs,
        })
    }

    /// Gate outputs that feed neither another gate nor an output port.
    pub fn dangling_outputs(&self) -> Vec<&str> {
        let mut used: HashMap<&str, ()> = HashMap::new();
        for g in &self.gates {
            for i in &g.inputs {
                used.insert(i, ());
            }
        }
        for o in &self.outputs {
            used.insert(o, ());
        }
        self.gates
            .iter()
            .map(|g| g.output.as_str())
            .filter(|o| !used.contains_key(o))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input {}", self.inputs.join(" "))?;
        writeln!(f, "output {}", self.outputs.join(" "))?;
        for g in &self.gates {
            let mut line = String::new();
            write!(line, "{} {}", g.kind.keyword(), g.output)?;
            for i in &g.inputs {
                write!(line, " {i}")?;
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for Netlist {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut net = Netlist::default();
        for (lineno, line) in text.lines().enumerate() {
            let mut words = line.split_whitespace();
            let Some(head) = words.next() else { continue };
            match head {
                "input" => net.inputs.extend(words.map(str::to_string)),
                "output" => net.outputs.extend(words.map(str::to_string)),
                kind => {
                    let kind: GateKind = kind.parse()?;
                    let output = words.next().ok_or_else(|| {
                        Error::Config(format!("line {}: gate without output", lineno + 1))
                    })?;
                    net.gates.push(Gate {
                        kind,
                        output: output.to_string(),
                        inputs: words.map(str::to_string).collect(),
                    });
                }
            }
        }
        Ok(net)
    }
}

/// Index-resolved netlist; evaluation is a single pass over the gates.
#[derive(Clone, Debug)]
pub struct CompiledNetlist {
    signals: usize,
    inputs: usize,
    gates: Vec<(GateKind, Vec<usize>, usize)>,
    outputs: Vec<usize>,
}

impl CompiledNetlist {
    pub fn evaluate(&self, inputs: &[bool]) -> Result<Vec<bool>> {
        let mut values = vec![false; self.signals];
        self.evaluate_into(inputs, &mut values)?;
        Ok(self.outputs.iter().map(|&o| values[o]).collect())
    }

    fn evaluate_into(&self, inputs: &[bool], values: &mut [bool]) -> Result<()> {
        if inputs.len() != self.inputs {
            return Err(Error::Contract(format!(
                "netlist expects {} inputs, got {}",
                self.inputs,
                inputs.len()
            )));
        }
        values[..self.inputs].copy_from_slice(inputs);
        for (kind, ins, out) in &self.gates {
            values[*out] = kind.eval(ins.iter().map(|&i| values[i]));
        }
        Ok(())
    }

    /// Runs an emitted adder netlist (ports `a*`, `b*`, `c0` / `s*`, `cout`).
    pub fn add(&self, a: FixedWord, b: FixedWord, c0: bool) -> Result<AddResult> {
        let width = a.width();
        if b.width() != width || self.inputs != 2 * width as usize + 1 {
            return Err(Error::WidthMismatch {
                expected: ((self.inputs.saturating_sub(1)) / 2) as u32,
                found: width,
            });
        }
        let (ab, bb) = (a.to_bits(), b.to_bits());
        let inputs: Vec<bool> = (0..width)
            .map(|i| (ab >> i) & 1 == 1)
            .chain((0..width).map(|i| (bb >> i) & 1 == 1))
            .chain([c0])
            .collect();
        let out = self.evaluate(&inputs)?;
        let sum = out[..width as usize]
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &s)| acc | ((s as u64) << i));
        Ok(AddResult {
            sum: FixedWord::from_bits(sum, width)?,
            carry_out: out[width as usize],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcla::mcla_add;

    #[test]
    fn rejects_bad_widths() {
        for w in [0, 3, 6, 68] {
            assert!(matches!(emit_netlist(w), Err(Error::Config(_))));
        }
    }

    #[test]
    fn width4_matches_mcla_exhaustive() {
        let net = emit_netlist(4).unwrap().compile().unwrap();
        let mut cases = 0;
        for a in -8..8 {
            for b in -8..8 {
                for c0 in [false, true] {
                    let (a, b) = (FixedWord::new(a, 4).unwrap(), FixedWord::new(b, 4).unwrap());
                    assert_eq!(net.add(a, b, c0).unwrap(), mcla_add(a, b, c0).unwrap());
                    cases += 1;
                }
            }
        }
        assert_eq!(cases, 512);
    }

    #[test]
    fn width8_has_two_group_blocks() {
        assert_eq!(emit_netlist(8).unwrap().group_block_count(), 2);
        assert_eq!(emit_netlist(24).unwrap().group_block_count(), 6);
    }

    #[test]
    fn no_dangling_logic() {
        for w in [4, 8, 28, 64] {
            assert!(emit_netlist(w).unwrap().dangling_outputs().is_empty());
        }
    }

    #[test]
    fn gate_set_is_and_or_xor_and_topological() {
        let net = emit_netlist(16).unwrap();
        // compile() fails on any read-before-drive, so success means the
        // gate list is topologically ordered.
        net.compile().unwrap();
        let mut shuffled = net.clone();
        shuffled.gates.reverse();
        assert!(shuffled.compile().is_err());
    }

    #[test]
    fn text_roundtrip() {
        let net = emit_netlist(8).unwrap();
        let text = net.to_text();
        assert!(text.starts_with("input a0 a1"));
        assert!(!text.contains('\r'));
        let parsed: Netlist = text.parse().unwrap();
        assert_eq!(parsed, net);
    }

    #[test]
    fn parse_errors() {
        assert!("nand x a b".parse::<Netlist>().is_err());
        let net: Netlist = "input a\noutput y\nand y a q\n".parse().unwrap();
        assert!(net.compile().is_err());
        let net: Netlist = "input a\noutput z\nand y a\n".parse().unwrap();
        assert!(net.compile().is_err());
    }
}
