use std::fmt::Write as _;

use super::{Design, HEADER};
use crate::compile::{Input, Literal, PacketNetlist};

fn literal(l: Literal, base: usize) -> String {
    let b = l.feature as usize - base;
    if l.negated {
        format!("~data[{b}]")
    } else {
        format!("data[{b}]")
    }
}

/// AND terms of a gate. Gates used once are spliced into their consumer;
/// gates used more than once are referenced by wire name.
fn terms(net: &PacketNetlist, gate: usize, base: usize, out: &mut Vec<String>) {
    for i in &net.gates[gate].inputs {
        match *i {
            Input::Literal(l) => out.push(literal(l, base)),
            Input::Gate(j) if net.refcount[j] >= 2 => out.push(format!("n{j}")),
            Input::Gate(j) => terms(net, j, base, out),
        }
    }
}

pub(crate) fn emit_hcb(d: &Design<'_>, p: usize) -> String {
    let net = &d.net.packets[p];
    let range = d.model.plan().feature_range(p);
    let base = range.start;
    let c = d.clauses;
    let w = d.bandwidth;
    let mut s = String::from(HEADER);
    let _ = writeln!(
        s,
        "// Clause block {p}: features {}..{} arrive as data[{}:0].",
        range.start,
        range.end - 1,
        range.len() - 1
    );
    let _ = writeln!(s, "module {} (", d.module(&format!("hcb_{p}")));
    let _ = writeln!(s, "    input  wire clk,");
    let _ = writeln!(s, "    input  wire rst,");
    let _ = writeln!(s, "    input  wire en,");
    let _ = writeln!(s, "    input  wire [{}:0] data,", w - 1);
    if p > 0 {
        let _ = writeln!(s, "    input  wire [{}:0] clause_in,", c - 1);
    }
    let _ = writeln!(s, "    output reg  [{}:0] clause_out", c - 1);
    let _ = writeln!(s, ");");
    let _ = writeln!(s);

    let shared: Vec<usize> = (0..net.gates.len())
        .filter(|&g| net.refcount[g] >= 2)
        .collect();
    for &g in &shared {
        let _ = writeln!(s, "    wire n{g};");
    }
    let _ = writeln!(s, "    wire [{}:0] clause_next;", c - 1);
    let _ = writeln!(s);
    for &g in &shared {
        let mut t = Vec::new();
        terms(net, g, base, &mut t);
        let _ = writeln!(s, "    assign n{g} = {};", t.join(" & "));
    }
    if !shared.is_empty() {
        let _ = writeln!(s);
    }
    for slot in 0..c {
        let mut t = Vec::new();
        if p > 0 {
            t.push(format!("clause_in[{slot}]"));
        }
        match net.roots.get(slot).copied().flatten() {
            Some(g) if net.refcount[g] >= 2 => t.push(format!("n{g}")),
            Some(g) => terms(net, g, base, &mut t),
            None => {}
        }
        let rhs = if t.is_empty() {
            "1'b1".to_string()
        } else {
            t.join(" & ")
        };
        let _ = writeln!(s, "    assign clause_next[{slot}] = {rhs};");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "    always @(posedge clk) begin");
    let _ = writeln!(s, "        if (rst)");
    let _ = writeln!(s, "            clause_out <= {{{c}{{1'b1}}}};");
    let _ = writeln!(s, "        else if (en)");
    let _ = writeln!(s, "            clause_out <= clause_next;");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "endmodule");
    s
}
