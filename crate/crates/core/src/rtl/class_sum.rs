use std::fmt::Write as _;

use super::{Design, HEADER};

fn bus(slots: &[usize]) -> (usize, String) {
    if slots.is_empty() {
        // Keeps two adders per class even when a polarity has no clauses.
        return (1, "1'b0".into());
    }
    let parts: Vec<String> = slots
        .iter()
        .rev()
        .map(|i| format!("clauses[{i}]"))
        .collect();
    (slots.len(), format!("{{{}}}", parts.join(", ")))
}

pub(crate) fn emit_class_sum(d: &Design<'_>) -> String {
    let sw = d.sum_width;
    let cw = d.count_width();
    let cl = d.classes;
    let k = d.cfg.datapath.class_sum_stages;
    let pc = d.module("popcount");
    let mut s = String::from(HEADER);

    let _ = writeln!(s, "module {pc} #(");
    let _ = writeln!(s, "    parameter N = 1,");
    let _ = writeln!(s, "    parameter OW = 1");
    let _ = writeln!(s, ") (");
    let _ = writeln!(s, "    input  wire [N-1:0] bits,");
    let _ = writeln!(s, "    output reg  [OW-1:0] count");
    let _ = writeln!(s, ");");
    let _ = writeln!(s, "    integer i;");
    let _ = writeln!(s, "    always @* begin");
    let _ = writeln!(s, "        count = {{OW{{1'b0}}}};");
    let _ = writeln!(s, "        for (i = 0; i < N; i = i + 1)");
    let _ = writeln!(s, "            count = count + bits[i];");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "endmodule");
    let _ = writeln!(s);

    let _ = writeln!(
        s,
        "// Class c sum sits at sums[c*{sw} +: {sw}], two's complement."
    );
    let _ = writeln!(s, "module {} (", d.module("class_sum"));
    let _ = writeln!(s, "    input  wire clk,");
    let _ = writeln!(s, "    input  wire rst,");
    let _ = writeln!(s, "    input  wire en,");
    let _ = writeln!(s, "    input  wire valid_in,");
    let _ = writeln!(s, "    input  wire [{}:0] clauses,", d.clauses - 1);
    let _ = writeln!(s, "    output wire [{}:0] sums,", cl * sw as usize - 1);
    let _ = writeln!(s, "    output wire valid_out");
    let _ = writeln!(s, ");");

    let slots = d.model.class_slots();
    for (c, (pos, neg)) in slots.iter().enumerate() {
        let _ = writeln!(s);
        let _ = writeln!(s, "    wire [{}:0] pos_cnt_{c};", cw - 1);
        let _ = writeln!(s, "    wire [{}:0] neg_cnt_{c};", cw - 1);
        let _ = writeln!(s, "    wire signed [{}:0] sum_{c};", sw - 1);
        for (tag, set) in [("pos", pos), ("neg", neg)] {
            let (n, b) = bus(set);
            let _ = writeln!(
                s,
                "    {pc} #(.N({n}), .OW({cw})) {tag}_acc_{c} (.bits({b}), .count({tag}_cnt_{c}));"
            );
        }
        let _ = writeln!(
            s,
            "    assign sum_{c} = $signed({{1'b0, pos_cnt_{c}}}) - $signed({{1'b0, neg_cnt_{c}}});"
        );
    }
    let all: Vec<String> = (0..cl).rev().map(|c| format!("sum_{c}")).collect();
    let _ = writeln!(s);
    let _ = writeln!(s, "    wire [{}:0] sums_comb;", cl * sw as usize - 1);
    let _ = writeln!(s, "    assign sums_comb = {{{}}};", all.join(", "));

    if k == 0 {
        let _ = writeln!(s, "    assign sums = sums_comb;");
        let _ = writeln!(s, "    assign valid_out = valid_in;");
    } else {
        let _ = writeln!(s);
        for i in 1..=k {
            let _ = writeln!(s, "    reg [{}:0] cs_q{i};", cl * sw as usize - 1);
            let _ = writeln!(s, "    reg cs_v{i};");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "    always @(posedge clk) begin");
        let _ = writeln!(s, "        if (rst) begin");
        for i in 1..=k {
            let _ = writeln!(s, "            cs_v{i} <= 1'b0;");
        }
        let _ = writeln!(s, "        end else if (en) begin");
        let _ = writeln!(s, "            cs_v1 <= valid_in;");
        let _ = writeln!(s, "            cs_q1 <= sums_comb;");
        for i in 2..=k {
            let _ = writeln!(s, "            cs_v{i} <= cs_v{};", i - 1);
            let _ = writeln!(s, "            cs_q{i} <= cs_q{};", i - 1);
        }
        let _ = writeln!(s, "        end");
        let _ = writeln!(s, "    end");
        let _ = writeln!(s);
        let _ = writeln!(s, "    assign sums = cs_q{k};");
        let _ = writeln!(s, "    assign valid_out = cs_v{k};");
    }
    let _ = writeln!(s, "endmodule");
    s
}
