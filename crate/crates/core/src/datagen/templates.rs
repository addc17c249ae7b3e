// SPDX-License-Identifier: MIT OR Apache-2.0

//! The sixteen construction templates, one ID and one OOD variant each.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::{Construction, Distribution, Fill, OutputRule, Slot, Template, Tok};

fn cat(c: &str) -> Tok {
    Tok::Cat(c.to_string())
}

/// Parses `"The {noun_sg} knows"` into literal and category tokens.
fn phrase(s: &str) -> Vec<Tok> {
    s.split_whitespace()
        .map(|w| match w.strip_prefix('{').and_then(|w| w.strip_suffix('}')) {
            Some(c) => cat(c),
            None => Tok::Lit(w.to_string()),
        })
        .collect()
}

fn same(name: &str, s: &str) -> Slot {
    Slot { name: name.to_string(), fill: Fill::Same(phrase(s)) }
}

fn alt(name: &str, base: &str, source: &str) -> Slot {
    Slot { name: name.to_string(), fill: Fill::Alt { base: phrase(base), source: phrase(source) } }
}

fn choice(words: &[&str]) -> OutputRule {
    OutputRule::Choice(words.iter().map(|w| w.to_string()).collect())
}

/// Output alternants for the NPI constructions.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NpiOutputs {
    pub licensed: Vec<String>,
    pub unlicensed: Vec<String>,
}

impl Default for NpiOutputs {
    fn default() -> Self {
        Self { licensed: vec!["any".into()], unlicensed: vec!["some".into()] }
    }
}

fn t(construction: Construction, distribution: Distribution, slots: Vec<Slot>, y_base: OutputRule, y_source: OutputRule) -> Template {
    Template { construction, distribution, slots, y_base, y_source }
}

/// The template for `c` under `d`.
pub fn template(c: Construction, d: Distribution, npi: &NpiOutputs) -> Template {
    use Construction::*;
    use Distribution::*;
    let npi_b = OutputRule::Choice(npi.licensed.clone());
    let npi_s = OutputRule::Choice(npi.unlicensed.clone());
    let pron_id = choice(&["him", "her", "them", "me", "you"]);
    let pron_ood = choice(&["us", "it"]);
    let (pron, stop) = match d {
        Id => (pron_id, choice(&["."])),
        Ood => (pron_ood, choice(&["."])),
    };
    match (c, d) {
        (EWhK, Id) => t(c, d, vec![
            same("prefix", "The {noun_sg} {know_verb}"),
            alt("filler", "who", "that"),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (EWhK, Ood) => t(c, d, vec![
            same("prefix", "Our {noun_sg} {know_verb}"),
            alt("filler", "whom", "that"),
            same("article", "a"),
            same("noun", "{adj} {noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (EWhW, Id) => t(c, d, vec![
            same("prefix", "The {noun_sg} {wonder_verb}"),
            alt("filler", "who", "if"),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (EWhW, Ood) => t(c, d, vec![
            same("prefix", "My {noun_sg} {wonder_verb}"),
            alt("filler", "whom", "whether"),
            same("article", "this"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (MWh, Id) => t(c, d, vec![
            same("prefix", "Then,"),
            alt("filler", "who", ""),
            same("nc", "did"),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_base}"),
        ], choice(&["?"]), pron),
        (MWh, Ood) => t(c, d, vec![
            same("prefix", "So,"),
            alt("filler", "whom", ""),
            same("nc", "will"),
            same("article", "a"),
            same("noun", "{adj} {noun_sg}"),
            same("verb", "{tverb_base}"),
        ], choice(&["?"]), pron),
        (RelCl, Id) => t(c, d, vec![
            same("prefix", "The {noun_sg}"),
            alt("filler", "who", "and"),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "{pverb_past}"),
        ], stop, pron),
        (RelCl, Ood) => t(c, d, vec![
            same("prefix", "Every {noun_sg}"),
            alt("filler", "whom", "and"),
            same("article", "our"),
            same("noun", "{adj} {noun_sg}"),
            same("verb", "{pverb_past}"),
        ], stop, pron),
        (Cleft, Id) => t(c, d, vec![
            same("prefix", "It was"),
            alt("filler", "the {noun_sg}", "{clear_adj}"),
            same("nc", "that"),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (Cleft, Ood) => t(c, d, vec![
            same("prefix", "It is"),
            alt("filler", "a {noun_sg}", "{clear_adj}"),
            same("nc", "that"),
            same("article", "my"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (PCleft, Id) => t(c, d, vec![
            alt("filler", "Who", "That"),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "is {pverb_ing}"),
        ], choice(&["is", "was"]), pron),
        (PCleft, Ood) => t(c, d, vec![
            alt("filler", "What", "That"),
            same("article", "my"),
            same("noun", "{adj} {noun_sg}"),
            same("verb", "was {pverb_ing}"),
        ], choice(&["is", "was"]), pron),
        (Topic, Id) => t(c, d, vec![
            same("prefix", "Actually,"),
            alt("filler", "the {noun_sg}", ""),
            same("article", "the"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (Topic, Ood) => t(c, d, vec![
            same("prefix", "Honestly,"),
            alt("filler", "a {noun_sg}", ""),
            same("article", "my"),
            same("noun", "{noun_sg}"),
            same("verb", "{tverb_past}"),
        ], stop, pron),
        (Cond, Id) => t(c, d, vec![
            same("prefix", "The {noun_sg} will {iverb}"),
            alt("licensor", "if", "while"),
            same("nc", "the {noun_sg}"),
            same("last", "{tverb_3sg}"),
        ], npi_b, npi_s),
        (Cond, Ood) => t(c, d, vec![
            same("prefix", "A {noun_sg} may {iverb}"),
            alt("licensor", "if", "while"),
            same("nc", "my {noun_sg}"),
            same("last", "{tverb_3sg}"),
        ], npi_b, npi_s),
        (DNeg, Id) => t(c, d, vec![
            alt("licensor", "No", "The"),
            same("nc", "{noun_sg} have"),
            same("last", "{tverb_pp}"),
        ], npi_b, npi_s),
        (DNeg, Ood) => t(c, d, vec![
            alt("licensor", "No", "The"),
            same("nc", "{adj} {noun_sg} has"),
            same("last", "{tverb_pp}"),
        ], npi_b, npi_s),
        (SOnly, Id) => t(c, d, vec![
            alt("licensor", "Only", "Even"),
            same("nc", "the {adj} {noun_pl}"),
            same("last", "have"),
        ], npi_b, npi_s),
        (SOnly, Ood) => t(c, d, vec![
            alt("licensor", "Only", "Even"),
            same("nc", "our {adj} {noun_pl}"),
            same("last", "had"),
        ], npi_b, npi_s),
        (Qnt, Id) => t(c, d, vec![
            same("prefix", "These are"),
            alt("licensor", "all", "some"),
            same("nc", "of the {noun_pl} who"),
            same("last", "{tverb_past}"),
        ], npi_b, npi_s),
        (Qnt, Ood) => t(c, d, vec![
            same("prefix", "Those were"),
            alt("licensor", "all", "some"),
            same("nc", "of our {noun_pl} that"),
            same("last", "{tverb_past}"),
        ], npi_b, npi_s),
        (EmbQ, Id) => t(c, d, vec![
            same("prefix", "The {noun_pl}"),
            alt("licensor", "wonder whether", "know that"),
            same("nc", "the {noun_sg} has"),
            same("last", "{tverb_pp}"),
        ], npi_b, npi_s),
        (EmbQ, Ood) => t(c, d, vec![
            same("prefix", "My {noun_pl}"),
            alt("licensor", "doubt whether", "believe that"),
            same("nc", "a {noun_sg} had"),
            same("last", "{tverb_pp}"),
        ], npi_b, npi_s),
        (SmpQ, Id) => t(c, d, vec![
            alt("licensor", "Has", ""),
            same("nc", "the {noun_sg}"),
            same("last", "{tverb_pastpp}"),
        ], npi_b, npi_s),
        (SmpQ, Ood) => t(c, d, vec![
            alt("licensor", "Had", ""),
            same("nc", "a {adj} {noun_sg}"),
            same("last", "{tverb_pastpp}"),
        ], npi_b, npi_s),
        (Sup, Id) => t(c, d, vec![
            same("prefix", "This is the"),
            Slot { name: "licensor".into(), fill: Fill::AltPair("sup_adj".into()) },
            same("nc", "{noun_sg} that had"),
            same("last", "{tverb_pp}"),
        ], npi_b, npi_s),
        (Sup, Ood) => t(c, d, vec![
            same("prefix", "That was the"),
            Slot { name: "licensor".into(), fill: Fill::AltPair("sup_adj".into()) },
            same("nc", "{noun_sg} who had"),
            same("last", "{tverb_pp}"),
        ], npi_b, npi_s),
        (Only, Id) => t(c, d, vec![
            same("prefix", "They are the"),
            alt("licensor", "only", "{adj}"),
            same("nc", "{noun_pl} that"),
            same("last", "{tverb_base}"),
        ], npi_b, npi_s),
        (Only, Ood) => t(c, d, vec![
            same("prefix", "We are the"),
            alt("licensor", "only", "{adj}"),
            same("nc", "{noun_pl} who"),
            same("last", "{tverb_base}"),
        ], npi_b, npi_s),
        (Ctrl, Id) => t(c, d, vec![
            same("prefix", "The {noun_sg} said that"),
            Slot { name: "filler".into(), fill: Fill::AltLinked("capital".into()) },
            same("nc", "is"),
            same("article", "the"),
            same("noun", "capital"),
            same("verb", "of"),
        ], OutputRule::Linked, OutputRule::Linked),
        (Ctrl, Ood) => t(c, d, vec![
            same("prefix", "A {noun_sg} claimed that"),
            Slot { name: "filler".into(), fill: Fill::AltLinked("capital".into()) },
            same("nc", "is"),
            same("article", "the"),
            same("noun", "capital"),
            same("verb", "of"),
        ], OutputRule::Linked, OutputRule::Linked),
    }
}
