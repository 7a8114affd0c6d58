use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::MetricConfig;
use crate::codecheck::jsx::JsxChild;
use crate::codecheck::layout::matches;
use crate::codecheck::{parse_jsx, parse_scss, GeneratedCode, JsxNode, JsxTree, StyleSheet, StyleValue};

/// Identifiers (hyphens allowed, for CSS properties), numbers with units,
/// quoted strings, then single punctuation characters.
pub fn tokenize(src: &str) -> Vec<String> {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    let re = TOKEN.get_or_init(|| {
        Regex::new(r#"[A-Za-z_$][\w$-]*|\d+(?:\.\d+)?[A-Za-z%]*|"[^"\n]*"|'[^'\n]*'|\S"#).expect("valid regex")
    });
    re.find_iter(src).map(|m| m.as_str().to_string()).collect()
}

fn ngrams(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut out = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Cumulative 4-gram BLEU with brevity penalty and per-token weights; an
/// n-gram weighs the mean of its tokens. Orders absent from both sides are
/// skipped, no smoothing otherwise.
fn weighted_bleu(cand: &[String], reference: &[String], weight: &dyn Fn(&str) -> f64) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return if cand.is_empty() && reference.is_empty() { 1.0 } else { 0.0 };
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 1..=4 {
        let c = ngrams(cand, n);
        let r = ngrams(reference, n);
        if c.is_empty() && r.is_empty() {
            continue;
        }
        let w = |g: &[String]| g.iter().map(|t| weight(t)).sum::<f64>() / g.len() as f64;
        let total: f64 = c.iter().map(|(g, k)| w(g) * *k as f64).sum();
        let clipped: f64 = c.iter().map(|(g, k)| w(g) * (*k).min(r.get(g).copied().unwrap_or(0)) as f64).sum();
        if total == 0.0 || clipped == 0.0 {
            return 0.0;
        }
        log_sum += (clipped / total).ln();
        orders += 1;
    }
    let precision = (log_sum / orders as f64).exp();
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * precision).clamp(0.0, 1.0)
}

/// Labelled tree used for subtree matching.
#[derive(Debug, Clone)]
struct AstNode {
    label: String,
    children: Vec<AstNode>,
}

fn jsx_ast(n: &JsxNode) -> AstNode {
    let mut children = Vec::new();
    if !n.classes.is_empty() {
        children.push(AstNode { label: "@className".into(), children: vec![] });
    }
    for (name, _) in &n.attributes {
        children.push(AstNode { label: format!("@{name}"), children: vec![] });
    }
    for c in &n.children {
        children.push(match c {
            JsxChild::Element(e) => jsx_ast(e),
            JsxChild::Text(_) => AstNode { label: "#text".into(), children: vec![] },
        });
    }
    AstNode { label: n.tag.clone(), children }
}

fn value_kind(v: &StyleValue) -> &'static str {
    match v {
        StyleValue::Px(_) => "px",
        StyleValue::Int(_) => "int",
        StyleValue::Number(_) => "number",
        StyleValue::Color(_) => "color",
        StyleValue::Url(_) => "url",
        StyleValue::Keyword(_) => "keyword",
    }
}

fn scss_ast(s: &StyleSheet) -> AstNode {
    let rules = s
        .rules
        .iter()
        .map(|r| AstNode {
            label: format!("rule/{}", r.selector.len()),
            children: r
                .declarations
                .iter()
                .map(|d| AstNode { label: d.property.clone(), children: vec![AstNode { label: value_kind(&d.value).into(), children: vec![] }] })
                .collect(),
        })
        .collect();
    AstNode { label: "stylesheet".into(), children: rules }
}

fn truncated(n: &AstNode, height: usize, out: &mut String) {
    out.push_str(&n.label);
    if height > 1 && !n.children.is_empty() {
        out.push('(');
        for (i, c) in n.children.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            truncated(c, height - 1, out);
        }
        out.push(')');
    }
}

/// Bag of every node's subtrees truncated at heights 1 to 3.
fn subtree_bag(root: &AstNode) -> BTreeMap<String, usize> {
    fn visit(n: &AstNode, bag: &mut BTreeMap<String, usize>) {
        for h in 1..=3 {
            let mut s = String::new();
            truncated(n, h, &mut s);
            *bag.entry(s).or_insert(0) += 1;
        }
        for c in &n.children {
            visit(c, bag);
        }
    }
    let mut bag = BTreeMap::new();
    visit(root, &mut bag);
    bag
}

fn bag_recall(cand: &BTreeMap<String, usize>, reference: &BTreeMap<String, usize>) -> f64 {
    let total: usize = reference.values().sum();
    if total == 0 {
        return 1.0;
    }
    let hit: usize = reference.iter().map(|(k, v)| (*v).min(cand.get(k).copied().unwrap_or(0))).sum();
    hit as f64 / total as f64
}

/// Fraction of reference AST subtrees (height ≤ 3) found in the candidate,
/// for the JSX and SCSS trees respectively.
pub fn ast_match(cand: &(JsxTree, StyleSheet), reference: &(JsxTree, StyleSheet)) -> (f64, f64) {
    (
        bag_recall(&subtree_bag(&jsx_ast(&cand.0.root)), &subtree_bag(&jsx_ast(&reference.0.root))),
        bag_recall(&subtree_bag(&scss_ast(&cand.1)), &subtree_bag(&scss_ast(&reference.1))),
    )
}

/// `class → selector` edges: which rules reach which JSX classes.
fn class_edges(tree: &JsxTree, sheet: &StyleSheet) -> BTreeSet<(String, String)> {
    fn visit<'t>(n: &'t JsxNode, sheet: &StyleSheet, ancestry: &mut Vec<&'t [String]>, out: &mut BTreeSet<(String, String)>) {
        for rule in &sheet.rules {
            if matches(&rule.selector, &n.classes, ancestry) {
                let class = rule.selector.last().cloned().unwrap_or_default();
                out.insert((class, rule.selector_text()));
            }
        }
        ancestry.push(&n.classes);
        for c in n.element_children() {
            visit(c, sheet, ancestry, out);
        }
        ancestry.pop();
    }
    let mut out = BTreeSet::new();
    visit(&tree.root, sheet, &mut Vec::new(), &mut out);
    out
}

/// Fraction of reference class→selector edges present in the candidate.
pub fn dataflow_match(cand: &(JsxTree, StyleSheet), reference: &(JsxTree, StyleSheet)) -> f64 {
    let r = class_edges(&reference.0, &reference.1);
    if r.is_empty() {
        return 1.0;
    }
    let c = class_edges(&cand.0, &cand.1);
    r.intersection(&c).count() as f64 / r.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBleu {
    pub score: f64,
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast: f64,
    pub dataflow: f64,
    pub candidate_parsed: bool,
}

fn parse_both(code: &GeneratedCode) -> Option<(JsxTree, StyleSheet)> {
    Some((parse_jsx(&code.jsx).ok()?, parse_scss(&code.scss).ok()?))
}

/// Weighted sum of BLEU, keyword-weighted BLEU, AST subtree recall and
/// class→selector recall, each averaged over the JSX and SCSS halves.
/// When the reference itself does not parse, the n-gram terms are
/// renormalized to carry the full weight.
pub fn codebleu(candidate: &GeneratedCode, reference: &GeneratedCode, cfg: &MetricConfig) -> CodeBleu {
    let keywords: BTreeSet<&str> = cfg.keyword_list.iter().map(String::as_str).collect();
    let kw = cfg.keyword_weight;
    let weight = move |t: &str| if keywords.contains(t) { kw } else { 1.0 };
    let one = |_: &str| 1.0;
    let halves = [(&candidate.jsx, &reference.jsx), (&candidate.scss, &reference.scss)];
    let mut ngram = 0.0;
    let mut weighted = 0.0;
    for (c, r) in halves {
        let (tc, tr) = (tokenize(c), tokenize(r));
        ngram += weighted_bleu(&tc, &tr, &one) / 2.0;
        weighted += weighted_bleu(&tc, &tr, &weight) / 2.0;
    }
    let w = &cfg.codebleu_weights;
    let cand = parse_both(candidate);
    let Some(refp) = parse_both(reference) else {
        let denom = w.ngram + w.weighted_ngram;
        let score = if denom > 0.0 { (w.ngram * ngram + w.weighted_ngram * weighted) / denom } else { 0.0 };
        return CodeBleu { score, ngram, weighted_ngram: weighted, ast: 0.0, dataflow: 0.0, candidate_parsed: cand.is_some() };
    };
    let (ast, dataflow) = match &cand {
        Some(c) => {
            let (aj, as_) = ast_match(c, &refp);
            ((aj + as_) / 2.0, dataflow_match(c, &refp))
        }
        None => (0.0, 0.0),
    };
    let score = (w.ngram * ngram + w.weighted_ngram * weighted + w.ast * ast + w.dataflow * dataflow).clamp(0.0, 1.0);
    CodeBleu { score, ngram, weighted_ngram: weighted, ast, dataflow, candidate_parsed: cand.is_some() }
}

fn normalized_lines(s: &str) -> Vec<&str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Longest common run of `a[alo..ahi]` and `b[blo..bhi]`; ties go to the
/// smallest start in `a`, then in `b`.
#[allow(clippy::needless_range_loop)]
fn longest_block(a: &[&str], b: &[&str], alo: usize, ahi: usize, blo: usize, bhi: usize) -> (usize, usize, usize) {
    let (mut bi, mut bj, mut best) = (alo, blo, 0);
    let width = bhi - blo;
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    for i in alo..ahi {
        for j in blo..bhi {
            let k = j - blo + 1;
            cur[k] = if a[i] == b[j] { prev[k - 1] + 1 } else { 0 };
            if cur[k] > best {
                best = cur[k];
                bi = i + 1 - best;
                bj = j + 1 - best;
            } else if cur[k] == best && best > 0 {
                let (si, sj) = (i + 1 - best, j + 1 - best);
                if (si, sj) < (bi, bj) {
                    bi = si;
                    bj = sj;
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|v| *v = 0);
    }
    (bi, bj, best)
}

/// 2·M / (|A| + |B|) over trimmed, non-blank lines, M being the total size
/// of the blocks found by recursive longest-common-run matching.
pub fn traditional_similarity(candidate: &str, reference: &str) -> f64 {
    let a = normalized_lines(candidate);
    let b = normalized_lines(reference);
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut matched = 0;
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, k) = longest_block(&a, &b, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        matched += k;
        stack.push((alo, i, blo, j));
        stack.push((i + k, ahi, j + k, bhi));
    }
    2.0 * matched as f64 / (a.len() + b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    const JSX: &str = "<div className=\"page\">\n  <div className=\"hero\" />\n  <p className=\"title\">Hi</p>\n</div>";
    const SCSS: &str = ".page { position: relative; width: 100px; height: 100px; }\n.hero { position: absolute; left: 1px; top: 2px; width: 10px; height: 10px; }\n.title { position: absolute; left: 3px; top: 20px; width: 30px; height: 12px; }";

    #[test]
    fn identity_is_one() {
        let code = GeneratedCode::new(JSX, SCSS);
        let s = codebleu(&code, &code, &MetricConfig::default());
        assert!((s.score - 1.0).abs() < 1e-12, "{s:?}");
        assert_eq!(traditional_similarity(JSX, JSX), 1.0);
    }

    #[test]
    fn empty_candidate_is_zero() {
        let s = codebleu(&GeneratedCode::new("", ""), &GeneratedCode::new(JSX, SCSS), &MetricConfig::default());
        assert_eq!(s.score, 0.0);
        assert!(!s.candidate_parsed);
    }

    #[test]
    fn deleting_an_element_lowers_the_score() {
        let reference = GeneratedCode::new(JSX, SCSS);
        let jsx = JSX.replace("  <div className=\"hero\" />\n", "");
        let scss: String = SCSS.lines().filter(|l| !l.starts_with(".hero")).collect::<Vec<_>>().join("\n");
        let s = codebleu(&GeneratedCode::new(jsx, scss), &reference, &MetricConfig::default());
        assert!(s.score < 1.0 && s.score > 0.0, "{s:?}");
        assert!(s.dataflow < 1.0);
    }

    #[test]
    fn traditional_closed_forms() {
        let lines: Vec<String> = (1..=10).map(|i| format!("line {i}")).collect();
        let a = lines.join("\n");
        let b = lines[..5].join("\n");
        assert!((traditional_similarity(&a, &b) - 10.0 / 15.0).abs() < 1e-12);
        assert_eq!(traditional_similarity("a\nb", "c\nd"), 0.0);
        assert_eq!(traditional_similarity("  a \n\n b", "a\nb\n"), 1.0);
    }

    #[test]
    fn tokens() {
        assert_eq!(tokenize("z-index: 10px;"), vec!["z-index", ":", "10px", ";"]);
        assert_eq!(tokenize("<div className=\"a b\"/>"), vec!["<", "div", "className", "=", "\"a b\"", "/", ">"]);
    }
}
