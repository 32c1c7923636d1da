use std::fmt::Write as _;

use super::{Design, HEADER};

pub(crate) fn emit_top(d: &Design<'_>) -> String {
    let sig = &d.cfg.signals;
    let w = d.bandwidth;
    let c = d.clauses;
    let p = d.packets;
    let cl = d.classes;
    let sw = d.sum_width as usize;
    let iw = d.index_width;
    let mut s = String::from(HEADER);
    let _ = writeln!(
        s,
        "// {} features in {p} packets of {w} bits, {cl} classes, {} clauses.",
        d.model.features,
        d.model.clause_count()
    );
    let _ = writeln!(s, "module {} (", d.module("top"));
    let _ = writeln!(s, "    input  wire clk,");
    let _ = writeln!(s, "    input  wire rst,");
    let _ = writeln!(s, "    input  wire [{}:0] {},", w - 1, sig.tdata);
    let _ = writeln!(s, "    input  wire {},", sig.tvalid);
    let _ = writeln!(s, "    output wire {},", sig.tready);
    let _ = writeln!(s, "    input  wire {},", sig.tlast);
    let _ = writeln!(s, "    output wire [{}:0] result_class,", iw - 1);
    let _ = writeln!(s, "    output wire result_valid,");
    let _ = writeln!(s, "    input  wire result_ready,");
    let _ = writeln!(s, "    output wire error,");
    let _ = writeln!(s, "    output wire [1:0] state");
    let _ = writeln!(s, ");");
    let _ = writeln!(s, "    wire advance;");
    let _ = writeln!(s, "    wire dp_valid;");
    let _ = writeln!(s, "    wire [{}:0] hcb_en;", p - 1);
    for i in 0..p {
        let _ = writeln!(s, "    wire [{}:0] clause_{i};", c - 1);
    }
    let _ = writeln!(s, "    wire [{}:0] sums;", cl * sw - 1);
    let _ = writeln!(s, "    wire sums_valid;");
    let _ = writeln!(s);

    let _ = writeln!(s, "    {} u_ctrl (", d.module("controller"));
    let _ = writeln!(s, "        .clk(clk),");
    let _ = writeln!(s, "        .rst(rst),");
    let _ = writeln!(s, "        .s_tvalid({}),", sig.tvalid);
    let _ = writeln!(s, "        .s_tlast({}),", sig.tlast);
    let _ = writeln!(s, "        .s_tready({}),", sig.tready);
    let _ = writeln!(s, "        .result_valid(result_valid),");
    let _ = writeln!(s, "        .result_ready(result_ready),");
    let _ = writeln!(s, "        .advance(advance),");
    let _ = writeln!(s, "        .hcb_en(hcb_en),");
    let _ = writeln!(s, "        .dp_valid(dp_valid),");
    let _ = writeln!(s, "        .error(error),");
    let _ = writeln!(s, "        .state(state)");
    let _ = writeln!(s, "    );");
    let _ = writeln!(s);

    for i in 0..p {
        let _ = writeln!(s, "    {} u_hcb_{i} (", d.module(&format!("hcb_{i}")));
        let _ = writeln!(s, "        .clk(clk),");
        let _ = writeln!(s, "        .rst(rst),");
        let _ = writeln!(s, "        .en(hcb_en[{i}]),");
        let _ = writeln!(s, "        .data({}),", sig.tdata);
        if i > 0 {
            let _ = writeln!(s, "        .clause_in(clause_{}),", i - 1);
        }
        let _ = writeln!(s, "        .clause_out(clause_{i})");
        let _ = writeln!(s, "    );");
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "    {} u_class_sum (", d.module("class_sum"));
    let _ = writeln!(s, "        .clk(clk),");
    let _ = writeln!(s, "        .rst(rst),");
    let _ = writeln!(s, "        .en(advance),");
    let _ = writeln!(s, "        .valid_in(dp_valid),");
    let _ = writeln!(s, "        .clauses(clause_{}),", p - 1);
    let _ = writeln!(s, "        .sums(sums),");
    let _ = writeln!(s, "        .valid_out(sums_valid)");
    let _ = writeln!(s, "    );");
    let _ = writeln!(s);

    let _ = writeln!(s, "    {} u_argmax (", d.module("argmax"));
    let _ = writeln!(s, "        .clk(clk),");
    let _ = writeln!(s, "        .rst(rst),");
    let _ = writeln!(s, "        .en(advance),");
    let _ = writeln!(s, "        .valid_in(sums_valid),");
    let _ = writeln!(s, "        .sums(sums),");
    let _ = writeln!(s, "        .result_class(result_class),");
    let _ = writeln!(s, "        .result_valid(result_valid)");
    let _ = writeln!(s, "    );");
    let _ = writeln!(s, "endmodule");
    s
}

pub(crate) fn emit_testbench(d: &Design<'_>, samples: usize) -> String {
    let sig = &d.cfg.signals;
    let w = d.bandwidth;
    let p = d.packets;
    let iw = d.index_width;
    let lat = p + d.cfg.datapath.post_hcb_latency();
    let half_ns = 500.0 / d.cfg.clock_mhz;
    let words = (samples * p).max(1);
    let mut s = String::from(HEADER);
    let _ = writeln!(
        s,
        "// Streams vectors.mem back to back and checks each result against"
    );
    let _ = writeln!(s, "// expected.mem. Prints PASS or FAIL and finishes.");
    let _ = writeln!(s, "`timescale 1ns / 1ps");
    let _ = writeln!(s, "module tb_top;");
    let _ = writeln!(s, "    localparam N = {samples};");
    let _ = writeln!(s, "    localparam P = {p};");
    let _ = writeln!(s, "    localparam LATENCY = {lat};");
    let _ = writeln!(s);
    let _ = writeln!(s, "    reg clk = 1'b0;");
    let _ = writeln!(s, "    reg rst = 1'b1;");
    let _ = writeln!(s, "    reg result_ready = 1'b1;");
    let _ = writeln!(s, "    reg [{}:0] vectors [0:{}];", w - 1, words - 1);
    let _ = writeln!(
        s,
        "    reg [{}:0] expected [0:{}];",
        iw - 1,
        samples.max(1) - 1
    );
    let _ = writeln!(s, "    integer idx = 0;");
    let _ = writeln!(s, "    integer got = 0;");
    let _ = writeln!(s, "    integer errors = 0;");
    let _ = writeln!(s, "    integer cycle = 0;");
    let _ = writeln!(s, "    integer first_accept = -1;");
    let _ = writeln!(s, "    integer first_result = -1;");
    let _ = writeln!(s);
    let _ = writeln!(s, "    wire [{}:0] tdata;", w - 1);
    let _ = writeln!(s, "    wire tvalid;");
    let _ = writeln!(s, "    wire tlast;");
    let _ = writeln!(s, "    wire tready;");
    let _ = writeln!(s, "    wire [{}:0] result_class;", iw - 1);
    let _ = writeln!(s, "    wire result_valid;");
    let _ = writeln!(s, "    wire error;");
    let _ = writeln!(s, "    wire [1:0] state;");
    let _ = writeln!(s);
    let _ = writeln!(s, "    assign tvalid = !rst && (idx < N * P);");
    let _ = writeln!(s, "    assign tdata = vectors[idx < N * P ? idx : 0];");
    let _ = writeln!(s, "    assign tlast = (idx % P) == P - 1;");
    let _ = writeln!(s);
    let _ = writeln!(s, "    {} dut (", d.module("top"));
    let _ = writeln!(s, "        .clk(clk),");
    let _ = writeln!(s, "        .rst(rst),");
    let _ = writeln!(s, "        .{}(tdata),", sig.tdata);
    let _ = writeln!(s, "        .{}(tvalid),", sig.tvalid);
    let _ = writeln!(s, "        .{}(tready),", sig.tready);
    let _ = writeln!(s, "        .{}(tlast),", sig.tlast);
    let _ = writeln!(s, "        .result_class(result_class),");
    let _ = writeln!(s, "        .result_valid(result_valid),");
    let _ = writeln!(s, "        .result_ready(result_ready),");
    let _ = writeln!(s, "        .error(error),");
    let _ = writeln!(s, "        .state(state)");
    let _ = writeln!(s, "    );");
    let _ = writeln!(s);
    let _ = writeln!(s, "    always #{half_ns} clk = ~clk;");
    let _ = writeln!(s);
    let _ = writeln!(s, "    initial begin");
    let _ = writeln!(s, "        if (N > 0) begin");
    let _ = writeln!(s, "            $readmemh(\"vectors.mem\", vectors);");
    let _ = writeln!(s, "            $readmemh(\"expected.mem\", expected);");
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "        repeat (2) @(posedge clk);");
    let _ = writeln!(s, "        rst <= 1'b0;");
    let _ = writeln!(s, "        if (N == 0) begin");
    let _ = writeln!(s, "            $display(\"PASS 0 vectors\");");
    let _ = writeln!(s, "            $finish;");
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s);
    let _ = writeln!(s, "    initial begin");
    let _ = writeln!(
        s,
        "        #({} * {});",
        2.0 * half_ns,
        samples * p + lat + 100
    );
    let _ = writeln!(
        s,
        "        $display(\"FAIL timeout after %0d of %0d results\", got, N);"
    );
    let _ = writeln!(s, "        $finish;");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s);
    let _ = writeln!(s, "    always @(posedge clk) begin");
    let _ = writeln!(s, "        cycle <= cycle + 1;");
    let _ = writeln!(s, "        if (tvalid && tready) begin");
    let _ = writeln!(s, "            if (first_accept < 0)");
    let _ = writeln!(s, "                first_accept = cycle;");
    let _ = writeln!(s, "            idx <= idx + 1;");
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "        if (!rst && error) begin");
    let _ = writeln!(s, "            $display(\"FAIL stream framing error\");");
    let _ = writeln!(s, "            $finish;");
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "        if (result_valid && result_ready) begin");
    let _ = writeln!(s, "            if (first_result < 0)");
    let _ = writeln!(s, "                first_result = cycle;");
    let _ = writeln!(s, "            if (result_class !== expected[got]) begin");
    let _ = writeln!(
        s,
        "                $display(\"mismatch at %0d: got %0d expected %0d\", got, result_class, expected[got]);"
    );
    let _ = writeln!(s, "                errors = errors + 1;");
    let _ = writeln!(s, "            end");
    let _ = writeln!(s, "            got = got + 1;");
    let _ = writeln!(s, "            if (got == N) begin");
    let _ = writeln!(
        s,
        "                if (first_result - first_accept != LATENCY) begin"
    );
    let _ = writeln!(
        s,
        "                    $display(\"latency %0d cycles, expected %0d\", first_result - first_accept, LATENCY);"
    );
    let _ = writeln!(s, "                    errors = errors + 1;");
    let _ = writeln!(s, "                end");
    let _ = writeln!(s, "                if (errors == 0)");
    let _ = writeln!(s, "                    $display(\"PASS %0d vectors\", N);");
    let _ = writeln!(s, "                else");
    let _ = writeln!(
        s,
        "                    $display(\"FAIL %0d errors\", errors);"
    );
    let _ = writeln!(s, "                $finish;");
    let _ = writeln!(s, "            end");
    let _ = writeln!(s, "        end");
    let _ = writeln!(s, "    end");
    let _ = writeln!(s, "endmodule");
    s
}
