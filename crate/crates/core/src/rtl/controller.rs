use std::fmt::Write as _;

use super::{Design, HEADER};
use crate::arch::FsmState;

pub(crate) fn emit_controller(d: &Design<'_>) -> String {
    let p = d.packets;
    let cw = (usize::BITS - (p - 1).leading_zeros()).max(1);
    let mut s = String::from(HEADER);
    let _ = writeln!(
        s,
        "// Routes packet p of each datapoint to clause block p. The whole"
    );
    let _ = writeln!(
        s,
        "// pipeline holds while a result waits for result_ready."
    );
    let _ = writeln!(s, "module {} (", d.module("controller"));
    let _ = writeln!(s, "    input  wire clk,");
    let _ = writeln!(s, "    input  wire rst,");
    let _ = writeln!(s, "    input  wire s_tvalid,");
    let _ = writeln!(s, "    input  wire s_tlast,");
    let _ = writeln!(s, "    output wire s_tready,");
    let _ = writeln!(s, "    input  wire result_valid,");
    let _ = writeln!(s, "    input  wire result_ready,");
    let _ = writeln!(s, "    output wire advance,");
    let _ = writeln!(s, "    output wire [{}:0] hcb_en,", p - 1);
    let _ = writeln!(s, "    output reg  dp_valid,");
    let _ = writeln!(s, "    output reg  error,");
    let _ = writeln!(s, "    output reg  [1:0] state");
    let _ = writeln!(s, ");");
    for st in FsmState::ALL {
        let _ = writeln!(s, "    localparam S_{} = 2'd{};", st.name(), st.encoding());
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "    reg  [{}:0] count;", cw - 1);
    let _ = writeln!(s, "    wire accept;");
    let _ = writeln!(s, "    wire at_last;");
    let _ = writeln!(s, "    wire [{}:0] count_next;", cw - 1);
    let _ = writeln!(s);
    let _ = writeln!(s, "    assign advance = !(result_valid && !result_ready);");
    let _ = writeln!(s, "    assign s_tready = advance && (state != S_RESET);");
    let _ = writeln!(s, "    assign accept = s_tvalid && s_tready;");
    let _ = writeln!(s, "    assign at_last = (count == {cw}'d{});", p - 1);
    let _ = writeln!(
        s,
        "    assign count_next = accept ? ((at_last || s_tlast) ? {cw}'d0 : count + {cw}'d1) : count;"
    );
    for i in 0..p {
        let _ = writeln!(
            s,
            "    assign hcb_en[{i}] = accept && (count == {cw}'d{i});"
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "    always @(posedge clk) begin");
    let _ = writeln!(s, "        if (rst) begin");
    let _ = writeln!(s, "            state <= S_RESET;");
    let _ = writeln!(s, "            count <= {cw}'d0;");
    let _ = writeln!(s, "            dp_valid <= 1'b0;");
    let _ = writeln!(s, "            error <= 1'b0;");
    let _ = writeln!(s, "        end else begin");
    let _ = writeln!(s, "            if (advance)");
    let _ = writeln!(
        s,
        "                dp_valid <= accept && at_last && s_tlast;"
    );
    let _ = writeln!(s, "            if (accept && (s_tlast != at_last))");
    let _ = writeln!(s, "                error <= 1'b1;");
    let _ = writeln!(s, "            count <= count_next;");
    let _ = writeln!(s, "            if (!advance)");
    let _ = writeln!(s, "                state <= S_STALL;");
    let _ = writeln!(s, "            else if (accept)");
    let _ = writeln!(
        s,
        "                state <= (count_next == {cw}'d0) ? S_IDLE : S_COMPUTE;"
    );
    let _ = writeln!(s, "            else if (count == {cw}'d0)");
    let _ = writeln!(s, "                state <= S_IDLE;");
    let _ = writeln!(s, "            else");
    let _ = writeln!(s, "                state <= S_STALL;");
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "endmodule");
    s
}
