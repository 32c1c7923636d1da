//! A small structural checker for the emitted Verilog. It does not
//! elaborate anything; it catches the mistakes an emitter tends to make:
//! undeclared or doubly declared names, missing modules and bad port names.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

const KEYWORDS: &[&str] = &[
    "always",
    "and",
    "assign",
    "automatic",
    "begin",
    "buf",
    "bufif0",
    "bufif1",
    "case",
    "casex",
    "casez",
    "cell",
    "cmos",
    "config",
    "deassign",
    "default",
    "defparam",
    "design",
    "disable",
    "edge",
    "else",
    "end",
    "endcase",
    "endconfig",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endprimitive",
    "endspecify",
    "endtable",
    "endtask",
    "event",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "highz0",
    "highz1",
    "if",
    "ifnone",
    "incdir",
    "include",
    "initial",
    "inout",
    "input",
    "instance",
    "integer",
    "join",
    "large",
    "liblist",
    "library",
    "localparam",
    "macromodule",
    "medium",
    "module",
    "nand",
    "negedge",
    "nmos",
    "nor",
    "noshowcancelled",
    "not",
    "notif0",
    "notif1",
    "or",
    "output",
    "parameter",
    "pmos",
    "posedge",
    "primitive",
    "pull0",
    "pull1",
    "pulldown",
    "pullup",
    "pulsestyle_onevent",
    "pulsestyle_ondetect",
    "rcmos",
    "real",
    "realtime",
    "reg",
    "release",
    "repeat",
    "rnmos",
    "rpmos",
    "rtran",
    "rtranif0",
    "rtranif1",
    "scalared",
    "showcancelled",
    "signed",
    "small",
    "specify",
    "specparam",
    "strong0",
    "strong1",
    "supply0",
    "supply1",
    "table",
    "task",
    "time",
    "tran",
    "tranif0",
    "tranif1",
    "tri",
    "tri0",
    "tri1",
    "triand",
    "trior",
    "trireg",
    "unsigned",
    "use",
    "uwire",
    "vectored",
    "wait",
    "wand",
    "weak0",
    "weak1",
    "while",
    "wire",
    "wor",
    "xnor",
    "xor",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LintIssue {
    pub file: String,
    pub module: String,
    pub message: String,
}

impl fmt::Display for LintIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.file, self.module, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number,
    System,
    Punct(char),
}

fn tokenize(src: &str) -> Vec<Tok> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let ident_char = |c: u8| c.is_ascii_alphanumeric() || c == b'_' || c == b'$';
    while i < b.len() {
        let c = b[i];
        match c {
            b'/' if b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i + 1 < b.len() && !(b[i] == b'*' && b[i + 1] == b'/') {
                    i += 1;
                }
                i += 2;
            }
            b'`' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' => {
                i += 1;
                while i < b.len() && b[i] != b'"' {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            b'$' => {
                i += 1;
                while i < b.len() && ident_char(b[i]) {
                    i += 1;
                }
                out.push(Tok::System);
            }
            b'0'..=b'9' | b'\'' => {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_' || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && b[i] == b'\'' {
                    i += 1;
                    if i < b.len() && (b[i] == b's' || b[i] == b'S') {
                        i += 1;
                    }
                    while i < b.len()
                        && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'?')
                    {
                        i += 1;
                    }
                }
                out.push(Tok::Number);
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < b.len() && ident_char(b[i]) {
                    i += 1;
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            c if c.is_ascii_whitespace() => i += 1,
            c => {
                out.push(Tok::Punct(c as char));
                i += 1;
            }
        }
    }
    out
}

struct Instance {
    module: String,
    name: String,
    ports: Vec<String>,
    params: Vec<String>,
}

struct ModuleInfo {
    file: String,
    name: String,
    ports: BTreeSet<String>,
    params: BTreeSet<String>,
    instances: Vec<Instance>,
}

fn is_ident(t: Option<&Tok>) -> Option<&str> {
    match t {
        Some(Tok::Ident(s)) if !is_keyword(s) => Some(s),
        _ => None,
    }
}

fn skip_balanced(toks: &[Tok], mut i: usize, open: char, close: char) -> usize {
    let mut depth = 0usize;
    while i < toks.len() {
        match toks[i] {
            Tok::Punct(c) if c == open => depth += 1,
            Tok::Punct(c) if c == close => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    i
}

/// Parses one module body starting after `module`. Returns the module and
/// the index after `endmodule`.
fn parse_module(
    file: &str,
    toks: &[Tok],
    start: usize,
    issues: &mut Vec<LintIssue>,
) -> (ModuleInfo, usize) {
    let name = is_ident(toks.get(start)).unwrap_or("?").to_string();
    let mut m = ModuleInfo {
        file: file.to_string(),
        name: name.clone(),
        ports: BTreeSet::new(),
        params: BTreeSet::new(),
        instances: Vec::new(),
    };
    let mut declared: BTreeMap<String, usize> = BTreeMap::new();
    let mut referenced: BTreeSet<String> = BTreeSet::new();
    let mut in_header = true;
    let mut i = start + 1;
    let end = toks[i..]
        .iter()
        .position(|t| matches!(t, Tok::Ident(s) if s == "endmodule"))
        .map_or(toks.len(), |k| i + k);

    while i < end {
        match &toks[i] {
            Tok::Ident(kw)
                if matches!(
                    kw.as_str(),
                    "input"
                        | "output"
                        | "inout"
                        | "wire"
                        | "reg"
                        | "integer"
                        | "localparam"
                        | "parameter"
                        | "genvar"
                ) =>
            {
                let is_port = matches!(kw.as_str(), "input" | "output" | "inout");
                let is_param = kw == "parameter";
                i += 1;
                loop {
                    while let Some(Tok::Ident(k)) = toks.get(i) {
                        if matches!(k.as_str(), "wire" | "reg" | "signed" | "integer") {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    if matches!(toks.get(i), Some(Tok::Punct('['))) {
                        let j = skip_balanced(toks, i, '[', ']');
                        collect_refs(&toks[i..j], &mut referenced);
                        i = j;
                    }
                    let Some(n) = is_ident(toks.get(i)) else {
                        break;
                    };
                    *declared.entry(n.to_string()).or_default() += 1;
                    if is_port {
                        m.ports.insert(n.to_string());
                    }
                    if is_param {
                        m.params.insert(n.to_string());
                    }
                    i += 1;
                    if matches!(toks.get(i), Some(Tok::Punct('['))) {
                        let j = skip_balanced(toks, i, '[', ']');
                        collect_refs(&toks[i..j], &mut referenced);
                        i = j;
                    }
                    if matches!(toks.get(i), Some(Tok::Punct('='))) {
                        let mut depth = 0i32;
                        let s = i;
                        while i < end {
                            match toks[i] {
                                Tok::Punct('(' | '[' | '{') => depth += 1,
                                Tok::Punct(')' | ']' | '}') if depth > 0 => depth -= 1,
                                Tok::Punct(')') if depth == 0 => break,
                                Tok::Punct(',' | ';') if depth == 0 => break,
                                _ => {}
                            }
                            i += 1;
                        }
                        collect_refs(&toks[s..i], &mut referenced);
                    }
                    if matches!(toks.get(i), Some(Tok::Punct(',')))
                        && is_ident(toks.get(i + 1)).is_some()
                    {
                        i += 1;
                        continue;
                    }
                    break;
                }
            }
            Tok::Punct(';') if in_header => {
                in_header = false;
                i += 1;
            }
            Tok::Ident(a) if !is_keyword(a) && !in_header => {
                let next = toks.get(i + 1);
                let is_inst = matches!(next, Some(Tok::Punct('#'))) || is_ident(next).is_some();
                if !is_inst {
                    referenced.insert(a.clone());
                    i += 1;
                    continue;
                }
                let mut inst = Instance {
                    module: a.clone(),
                    name: String::new(),
                    ports: Vec::new(),
                    params: Vec::new(),
                };
                i += 1;
                if matches!(toks.get(i), Some(Tok::Punct('#'))) {
                    let j = skip_balanced(toks, i + 1, '(', ')');
                    named_connections(&toks[i + 1..j], &mut inst.params, &mut referenced);
                    i = j;
                }
                inst.name = is_ident(toks.get(i)).unwrap_or("?").to_string();
                *declared.entry(inst.name.clone()).or_default() += 1;
                i += 1;
                let j = skip_balanced(toks, i, '(', ')');
                named_connections(&toks[i..j], &mut inst.ports, &mut referenced);
                i = j;
                m.instances.push(inst);
            }
            Tok::Punct('.') => i += 2,
            _ => i += 1,
        }
    }

    let issue = |message: String| LintIssue {
        file: file.to_string(),
        module: name.clone(),
        message,
    };
    for (n, count) in &declared {
        if *count > 1 {
            issues.push(issue(format!("{n} declared {count} times")));
        }
    }
    for n in &referenced {
        if !declared.contains_key(n) {
            issues.push(issue(format!("{n} used but not declared")));
        }
    }
    (m, end + 1)
}

fn collect_refs(toks: &[Tok], out: &mut BTreeSet<String>) {
    let mut after_dot = false;
    for t in toks {
        match t {
            Tok::Ident(s) if !is_keyword(s) && !after_dot => {
                out.insert(s.clone());
            }
            _ => {}
        }
        after_dot = matches!(t, Tok::Punct('.'));
    }
}

/// `( .a(x), .b(y) )`: names go to `names`, expressions to `refs`.
fn named_connections(toks: &[Tok], names: &mut Vec<String>, refs: &mut BTreeSet<String>) {
    let mut i = 0;
    while i < toks.len() {
        if matches!(toks[i], Tok::Punct('.')) {
            if let Some(n) = is_ident(toks.get(i + 1)) {
                names.push(n.to_string());
            }
            i += 2;
            continue;
        }
        if let Tok::Ident(s) = &toks[i] {
            if !is_keyword(s) {
                refs.insert(s.clone());
            }
        }
        i += 1;
    }
}

/// Checks a set of Verilog files as one design.
pub fn lint_design<'a>(files: impl IntoIterator<Item = (&'a str, &'a str)>) -> Vec<LintIssue> {
    let mut issues = Vec::new();
    let mut modules: BTreeMap<String, ModuleInfo> = BTreeMap::new();
    for (file, text) in files {
        let toks = tokenize(text);
        let mut i = 0;
        while i < toks.len() {
            if matches!(&toks[i], Tok::Ident(s) if s == "module") {
                let (m, next) = parse_module(file, &toks, i + 1, &mut issues);
                if let Some(prev) = modules.get(&m.name) {
                    issues.push(LintIssue {
                        file: file.to_string(),
                        module: m.name.clone(),
                        message: format!("module also defined in {}", prev.file),
                    });
                }
                modules.insert(m.name.clone(), m);
                i = next;
            } else {
                i += 1;
            }
        }
    }
    for m in modules.values() {
        for inst in &m.instances {
            let issue = |message: String| LintIssue {
                file: m.file.clone(),
                module: m.name.clone(),
                message,
            };
            let Some(target) = modules.get(&inst.module) else {
                issues.push(issue(format!(
                    "instance {} of unknown module {}",
                    inst.name, inst.module
                )));
                continue;
            };
            for p in &inst.ports {
                if !target.ports.contains(p) {
                    issues.push(issue(format!(
                        "instance {} connects missing port {p}",
                        inst.name
                    )));
                }
            }
            for p in &inst.params {
                if !target.params.contains(p) {
                    issues.push(issue(format!(
                        "instance {} sets missing parameter {p}",
                        inst.name
                    )));
                }
            }
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_design_passes() {
        let a = "module a #(parameter N = 2) (input wire [N-1:0] x, output wire y);\n\
                 assign y = &x; // and\nendmodule\n";
        let b = "module b (input wire clk, output wire o);\n  wire [1:0] t;\n  assign t = 2'b11;\n\
                 a #(.N(2)) u_a (.x(t), .y(o));\nendmodule\n";
        assert!(lint_design([("a.v", a), ("b.v", b)]).is_empty());
    }

    #[test]
    fn catches_undeclared_and_duplicates() {
        let a = "module a (input wire x, output wire y);\n wire t;\n wire t;\n assign y = x & z;\nendmodule\n";
        let issues = lint_design([("a.v", a)]);
        let msgs: Vec<_> = issues.iter().map(|i| i.message.as_str()).collect();
        assert!(msgs.contains(&"t declared 2 times"), "{msgs:?}");
        assert!(msgs.contains(&"z used but not declared"), "{msgs:?}");
    }

    #[test]
    fn catches_bad_instances() {
        let a = "module a (input wire x);\nendmodule\n";
        let b = "module b (input wire i);\n a u0 (.x(i), .q(i));\n c u1 (.x(i));\nendmodule\n";
        let issues = lint_design([("a.v", a), ("b.v", b)]);
        assert_eq!(issues.len(), 2, "{issues:?}");
    }
}
