use std::fmt::Write as _;

use super::{Design, HEADER};
use crate::arch::{tree_depth, tree_leaves};

pub(crate) fn emit_argmax(d: &Design<'_>) -> String {
    let sw = d.sum_width;
    let iw = d.index_width;
    let cl = d.classes;
    let leaves = tree_leaves(cl);
    let depth = tree_depth(cl);
    let boundaries = d.cfg.datapath.argmax_boundaries(cl);
    let mut s = String::from(HEADER);
    let _ = writeln!(
        s,
        "// Comparison tree over {leaves} leaves; a tie keeps the left (lower) index."
    );
    let _ = writeln!(s, "module {} (", d.module("argmax"));
    let _ = writeln!(s, "    input  wire clk,");
    let _ = writeln!(s, "    input  wire rst,");
    let _ = writeln!(s, "    input  wire en,");
    let _ = writeln!(s, "    input  wire valid_in,");
    let _ = writeln!(s, "    input  wire [{}:0] sums,", cl * sw as usize - 1);
    let _ = writeln!(s, "    output reg  [{}:0] result_class,", iw - 1);
    let _ = writeln!(s, "    output reg  result_valid");
    let _ = writeln!(s, ");");
    let _ = writeln!(
        s,
        "    localparam signed [{}:0] MIN_SUM = {{1'b1, {{{}{{1'b0}}}}}};",
        sw - 1,
        sw - 1
    );
    let _ = writeln!(s);

    // Names of the values/indices currently at the tree frontier.
    let mut cur_v: Vec<String> = Vec::with_capacity(leaves);
    let mut cur_i: Vec<String> = Vec::with_capacity(leaves);
    let mut cur_valid = "valid_in".to_string();
    let mut stage = 0;

    for j in 0..leaves {
        let _ = writeln!(s, "    wire signed [{}:0] lv0_{j};", sw - 1);
        let _ = writeln!(s, "    wire [{}:0] li0_{j};", iw - 1);
        if j < cl {
            let _ = writeln!(s, "    assign lv0_{j} = sums[{} +: {sw}];", j * sw as usize);
        } else {
            let _ = writeln!(s, "    assign lv0_{j} = MIN_SUM;");
        }
        let _ = writeln!(s, "    assign li0_{j} = {iw}'d{j};");
        cur_v.push(format!("lv0_{j}"));
        cur_i.push(format!("li0_{j}"));
    }

    let mut level = 0;
    loop {
        while stage < boundaries.len() && boundaries[stage] == level {
            stage += 1;
            let _ = writeln!(s);
            let _ = writeln!(s, "    // Register stage {stage} after level {level}.");
            let _ = writeln!(s, "    reg rvalid{stage};");
            for j in 0..cur_v.len() {
                let _ = writeln!(s, "    reg signed [{}:0] rv{stage}_{j};", sw - 1);
                let _ = writeln!(s, "    reg [{}:0] ri{stage}_{j};", iw - 1);
            }
            let mut body = vec![format!("rvalid{stage} <= {cur_valid};")];
            for j in 0..cur_v.len() {
                body.push(format!("rv{stage}_{j} <= {};", cur_v[j]));
                body.push(format!("ri{stage}_{j} <= {};", cur_i[j]));
                cur_v[j] = format!("rv{stage}_{j}");
                cur_i[j] = format!("ri{stage}_{j}");
            }
            emit_registers(&mut s, &format!("rvalid{stage}"), &body);
            cur_valid = format!("rvalid{stage}");
        }
        if level == depth {
            break;
        }
        level += 1;
        let _ = writeln!(s);
        let n = cur_v.len() / 2;
        let mut nv = Vec::with_capacity(n);
        let mut ni = Vec::with_capacity(n);
        for j in 0..n {
            let (lv, li) = (&cur_v[2 * j], &cur_i[2 * j]);
            let (rv, ri) = (&cur_v[2 * j + 1], &cur_i[2 * j + 1]);
            let _ = writeln!(s, "    wire left{level}_{j};");
            let _ = writeln!(s, "    wire signed [{}:0] lv{level}_{j};", sw - 1);
            let _ = writeln!(s, "    wire [{}:0] li{level}_{j};", iw - 1);
            let _ = writeln!(s, "    assign left{level}_{j} = {lv} >= {rv};");
            let _ = writeln!(
                s,
                "    assign lv{level}_{j} = left{level}_{j} ? {lv} : {rv};"
            );
            let _ = writeln!(
                s,
                "    assign li{level}_{j} = left{level}_{j} ? {li} : {ri};"
            );
            nv.push(format!("lv{level}_{j}"));
            ni.push(format!("li{level}_{j}"));
        }
        cur_v = nv;
        cur_i = ni;
    }

    let _ = writeln!(s);
    let _ = writeln!(s, "    always @(posedge clk) begin");
    let _ = writeln!(s, "        if (rst) begin");
    let _ = writeln!(s, "            result_valid <= 1'b0;");
    let _ = writeln!(s, "            result_class <= {iw}'d0;");
    let _ = writeln!(s, "        end else if (en) begin");
    let _ = writeln!(s, "            result_valid <= {cur_valid};");
    let _ = writeln!(s, "            if ({cur_valid})");
    let _ = writeln!(s, "                result_class <= {};", cur_i[0]);
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "endmodule");
    s
}

fn emit_registers(s: &mut String, valid: &str, body: &[String]) {
    let _ = writeln!(s, "    always @(posedge clk) begin");
    let _ = writeln!(s, "        if (rst) begin");
    let _ = writeln!(s, "            {valid} <= 1'b0;");
    let _ = writeln!(s, "        end else if (en) begin");
    for line in body {
        let _ = writeln!(s, "            {line}");
    }
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "    end");
}
