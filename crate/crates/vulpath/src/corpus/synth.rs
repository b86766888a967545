//! Synthetic SARD-style corpus generator.
//!
//! Every function is a variation of the classic stack/heap buffer-overflow
//! test case: allocate buffers, route a pointer to one of them (optionally
//! through a branch), fill a source, and copy a fixed length into the
//! destination. A function is vulnerable when some assigned destination is
//! smaller than the copy length, and then the copy call line is its sink.
//! Buffer names follow the SARD Bad/Good convention, so the signal that a
//! graph is vulnerable lives in which buffer *flows into the copy*, not in
//! the copy statement's own tokens: safe functions may still declare a
//! decoy undersized buffer that never reaches the copy, and vulnerable
//! ones may contain an extra well-sized copy that is not a sink.
//!
//! All identifiers come from finite pools so embeddings trained on one
//! split cover unseen functions.

use super::{content_digest, CorpusEntry};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const PREFIXES: &[&str] = &[
    "data", "buffer", "dest", "block", "chunk", "region", "store", "payload",
];
const SOURCES: &[&str] = &["source", "input", "src", "values"];
const PREDICATES: &[&str] = &["globalReturnsTrueOrFalse", "staticReturnsTrue", "globalFlag"];
const PRINTERS: &[&str] = &["printIntLine", "printLine", "useValue", "consumeInt"];
const TEMPS: &[&str] = &["tmp1", "tmp2", "tmp3", "tmp4"];
const INT_COPIES: &[&str] = &["memmove", "memcpy"];
const CHAR_COPIES: &[&str] = &["strcpy", "strncpy"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    StackInt,  // ALLOCA + int buffers
    HeapInt,   // malloc + int buffers
    StackChar, // ALLOCA + char buffers + string copy
}

impl Family {
    fn cwe(self) -> &'static str {
        match self {
            Family::StackInt => "CWE-121",
            Family::HeapInt => "CWE-122",
            Family::StackChar => "CWE-126",
        }
    }

    fn allocator(self) -> &'static str {
        match self {
            Family::StackInt | Family::StackChar => "ALLOCA",
            Family::HeapInt => "malloc",
        }
    }

    fn elem(self) -> &'static str {
        match self {
            Family::StackChar => "char",
            _ => "int",
        }
    }
}

struct Emitter {
    lines: Vec<String>,
}

impl Emitter {
    fn new() -> Self {
        Emitter { lines: Vec::new() }
    }

    /// Push one line and return its 1-based line number.
    fn push(&mut self, text: String) -> u32 {
        self.lines.push(text);
        self.lines.len() as u32
    }

    fn source(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// Small scalar statements that pad functions without touching buffers.
struct Distractors {
    declared: Vec<&'static str>,
    printer: &'static str,
    budget: u32,
}

impl Distractors {
    fn emit(&mut self, em: &mut Emitter, rng: &mut ChaCha8Rng, cap: u32) {
        let take = self.budget.min(cap).min(rng.gen_range(0..=2));
        for _ in 0..take {
            self.budget -= 1;
            let undeclared: Vec<&'static str> = TEMPS
                .iter()
                .copied()
                .filter(|t| !self.declared.contains(t))
                .collect();
            let roll = rng.gen_range(0..3);
            if roll == 0 || self.declared.is_empty() {
                if let Some(&t) = undeclared.as_slice().choose(rng) {
                    match self.declared.as_slice().choose(rng) {
                        Some(&u) if rng.gen_bool(0.5) => {
                            let op = *["+", "-", "*"].choose(rng).unwrap();
                            em.push(format!("    int {t} = {u} {op} {};", rng.gen_range(1..100)));
                        }
                        _ => {
                            em.push(format!("    int {t} = {};", rng.gen_range(1..100)));
                        }
                    }
                    self.declared.push(t);
                }
            } else if roll == 1 {
                let &t = self.declared.as_slice().choose(rng).unwrap();
                em.push(format!("    {}({t});", self.printer));
            } else {
                let &t = self.declared.as_slice().choose(rng).unwrap();
                let &u = self.declared.as_slice().choose(rng).unwrap();
                let op = *["+", "-"].choose(rng).unwrap();
                em.push(format!("    {t} = {u} {op} {};", rng.gen_range(1..100)));
            }
        }
    }
}

/// Generate `n` labeled functions; identical `(n, seed)` pairs produce a
/// byte-identical corpus.
pub fn generate_synthetic(n: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| generate_one(i, &mut rng)).collect()
}

fn generate_one(index: usize, rng: &mut ChaCha8Rng) -> CorpusEntry {
    let family = *[Family::StackInt, Family::HeapInt, Family::StackChar]
        .choose(rng)
        .unwrap();
    let vulnerable = rng.gen_bool(0.5);
    let branched = rng.gen_bool(0.6);
    let with_decoy = rng.gen_bool(0.15);
    let with_safe_copy = family != Family::StackChar && rng.gen_bool(0.10);

    let prefix = *PREFIXES.choose(rng).unwrap();
    let decoy_prefix = *PREFIXES
        .iter()
        .filter(|p| **p != prefix)
        .collect::<Vec<_>>()
        .choose(rng)
        .unwrap();
    let source_name = *SOURCES.choose(rng).unwrap();
    let predicate = *PREDICATES.choose(rng).unwrap();
    let printer = *PRINTERS.choose(rng).unwrap();
    let copy_fn = match family {
        Family::StackChar => *CHAR_COPIES.choose(rng).unwrap(),
        _ => *INT_COPIES.choose(rng).unwrap(),
    };
    let elem = family.elem();
    let alloc = family.allocator();

    let copy_len: u32 = *[60u32, 80, 100, 120].choose(rng).unwrap();
    let bad_size = rng.gen_range(copy_len / 4..=copy_len - 10);
    let good_size = rng.gen_range(copy_len..=copy_len + 100);
    let good2_size = rng.gen_range(copy_len..=copy_len + 100);

    let target = prefix.to_string();
    let bad_buf = format!("{prefix}BadBuffer");
    let good_buf = format!("{prefix}GoodBuffer");
    let good2_buf = format!("{prefix}GoodBuffer2");
    let decoy_buf = format!("{decoy_prefix}BadBuffer");

    let mut em = Emitter::new();
    em.push(format!("void {}_{index:04}()", family_tag(family)));
    em.push("{".to_string());
    em.push(format!("    {elem} * {target};"));

    // buffer declarations: the vulnerable form declares Bad+Good, the safe
    // form Good (and a second Good when branched); an optional decoy Bad
    // never flows into the routed pointer
    let mut decls: Vec<(String, u32)> = Vec::new();
    if vulnerable {
        decls.push((bad_buf.clone(), bad_size));
        decls.push((good_buf.clone(), good_size));
    } else {
        decls.push((good_buf.clone(), good_size));
        if branched {
            decls.push((good2_buf.clone(), good2_size));
        }
    }
    if with_decoy {
        let decoy_size = rng.gen_range(copy_len / 4..=copy_len - 10);
        decls.push((decoy_buf.clone(), decoy_size));
    }
    decls.shuffle(rng);
    for (name, size) in &decls {
        em.push(format!(
            "    {elem} * {name} = ({elem} *){alloc}({size}*sizeof({elem}));"
        ));
    }

    let mut distract = Distractors {
        declared: Vec::new(),
        printer,
        budget: rng.gen_range(1..=4),
    };
    distract.emit(&mut em, rng, 2);

    // route the target pointer
    if branched {
        let (then_buf, else_buf) = if vulnerable {
            if rng.gen_bool(0.5) {
                (bad_buf.clone(), good_buf.clone())
            } else {
                (good_buf.clone(), bad_buf.clone())
            }
        } else {
            (good_buf.clone(), good2_buf.clone())
        };
        em.push(format!("    if({predicate}())"));
        em.push("    {".to_string());
        em.push(format!("        {target} = {then_buf};"));
        em.push("    }".to_string());
        em.push("    else".to_string());
        em.push("    {".to_string());
        em.push(format!("        {target} = {else_buf};"));
        em.push("    }".to_string());
    } else {
        let buf = if vulnerable { &bad_buf } else { &good_buf };
        em.push(format!("    {target} = {buf};"));
    }

    distract.emit(&mut em, rng, 1);

    // fill the source and perform the copy
    let copy_line;
    match family {
        Family::StackChar => {
            em.push(format!("    char {source_name}[{copy_len}];"));
            em.push(format!("    memset({source_name}, 'A', {});", copy_len - 1));
            em.push(format!("    {source_name}[{}] = '\\0';", copy_len - 1));
            copy_line = match copy_fn {
                "strncpy" => em.push(format!(
                    "    strncpy({target}, {source_name}, {copy_len});"
                )),
                _ => em.push(format!("    strcpy({target}, {source_name});")),
            };
        }
        _ => {
            em.push(format!("    int {source_name}[{copy_len}] = {{0}};"));
            copy_line = em.push(format!(
                "    {copy_fn}({target}, {source_name}, {copy_len}*sizeof(int));"
            ));
        }
    }

    if with_safe_copy {
        let safe_len = copy_len - rng.gen_range(0..=copy_len / 4);
        em.push(format!(
            "    {copy_fn}({good_buf}, {source_name}, {safe_len}*sizeof(int));"
        ));
    }

    em.push(format!("    {printer}({target}[0]);"));
    distract.emit(&mut em, rng, u32::MAX);
    em.push("}".to_string());

    let source = em.source();
    let sink_lines: BTreeSet<u32> = if vulnerable {
        std::iter::once(copy_line).collect()
    } else {
        BTreeSet::new()
    };
    let md5 = content_digest(&source);
    CorpusEntry {
        id: format!("synth-{index:04}"),
        cwe: family.cwe().to_string(),
        source,
        vulnerable,
        sink_lines,
        md5,
    }
}

fn family_tag(family: Family) -> &'static str {
    match family {
        Family::StackInt => "stack_copy",
        Family::HeapInt => "heap_copy",
        Family::StackChar => "string_copy",
    }
}
