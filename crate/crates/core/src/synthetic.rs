//! Template-generated event sentences for desk-scale experiments.
//!
//! Each sentence instantiates one of a few clause templates built from role
//! phrase banks (participants, trigger verbs, targets, places, times,
//! organizers, facility names). Some sentences carry a second trigger
//! clause sharing the same arguments, and a few are event-free filler.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::AnnotatedSentence;
use crate::label::{BioTag, RoleLabel};

const PARTICIPANTS: &[&str] = &[
    "protesters", "students", "workers", "farmers", "residents", "miners", "teachers", "activists",
    "nurses", "villagers", "demonstrators", "taxi drivers", "local traders", "union members",
    "angry youths", "hundreds of people", "a group of women", "about 30 people", "supporters",
    "the crowd", "hospital staff", "bus drivers", "street vendors", "township residents",
    "security guards", "parents", "pensioners", "factory employees",
];
const TRIGGERS: &[&str] = &[
    "marched", "protested", "rallied", "gathered", "clashed", "rioted", "demonstrated", "picketed",
    "blocked", "stormed", "attacked", "burned", "occupied", "staged a sit-in", "went on strike",
    "chanted", "boycotted", "barricaded", "looted",
];
const TARGETS: &[&str] = &[
    "the government", "the mayor", "the company", "the police", "the new law", "the council",
    "the ministry", "the mine owners", "the factory", "the governor", "foreign investors",
    "the ruling party", "rising prices", "the court ruling", "electricity cuts", "the water board",
    "the transport department", "land evictions", "unpaid wages", "the housing project",
];
const PLACES: &[&str] = &[
    "Johannesburg", "Durban", "Cape Town", "Beijing", "Shanghai", "Guangzhou", "Soweto",
    "Pretoria", "Hong Kong", "Wuhan", "Port Elizabeth", "Shenzhen", "Bloemfontein", "Chengdu",
    "Polokwane", "Nanjing", "East London",
];
const TIMES: &[&str] = &[
    "on Monday", "on Tuesday", "on Friday", "last week", "yesterday", "on Sunday morning",
    "earlier this month", "on Wednesday night", "in March", "last year", "on Thursday afternoon",
    "two days ago", "in early June", "on Saturday evening",
];
const ORGANIZERS: &[&str] = &[
    "the union", "the student council", "the civic association", "the opposition party",
    "the workers federation", "the youth league", "the residents committee",
];
const FACILITIES: &[&str] = &[
    "the city hall", "the parliament building", "the main square", "the university campus",
    "the central station", "the provincial office", "the stadium", "the police station",
    "the district court", "the union headquarters",
];
const FILLER: &[&str] = &[
    "officials said the situation was calm",
    "the report was released by the ministry",
    "analysts expect more talks next month",
    "the weather was cold and windy",
    "shops reopened after the holiday",
];

struct Builder {
    tokens: Vec<String>,
    tags: Vec<BioTag>,
}

impl Builder {
    fn words(&mut self, phrase: &str) {
        for w in phrase.split(' ') {
            self.tokens.push(String::from(w));
            self.tags.push(BioTag::O);
        }
    }

    fn role(&mut self, phrase: &str, role: RoleLabel) {
        for (i, w) in phrase.split(' ').enumerate() {
            self.tokens.push(String::from(w));
            self.tags.push(if i == 0 { BioTag::B(role) } else { BioTag::I(role) });
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, bank: &[&'a str]) -> &'a str {
    bank.choose(rng).copied().unwrap_or("")
}

fn sentence(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<BioTag>) {
    use RoleLabel::*;
    let mut b = Builder { tokens: Vec::new(), tags: Vec::new() };
    let template = rng.random_range(0..10);
    match template {
        0..=3 => {
            // [time ,] participant trigger against target in place [.]
            if rng.random_bool(0.4) {
                let time = pick(rng, TIMES);
                b.role(time, Etime);
                b.words(",");
            }
            b.role(pick(rng, PARTICIPANTS), Participant);
            b.role(pick(rng, TRIGGERS), Trigger);
            b.words("against");
            b.role(pick(rng, TARGETS), Target);
            b.words("in");
            b.role(pick(rng, PLACES), Place);
            if rng.random_bool(0.3) {
                b.words("and");
                b.role(pick(rng, TRIGGERS), Trigger);
            }
        }
        4..=5 => {
            // participant led by organizer trigger outside facility time
            b.role(pick(rng, PARTICIPANTS), Participant);
            b.words("led by");
            b.role(pick(rng, ORGANIZERS), Organizer);
            b.role(pick(rng, TRIGGERS), Trigger);
            b.words("outside");
            b.role(pick(rng, FACILITIES), Fname);
            b.role(pick(rng, TIMES), Etime);
        }
        6..=7 => {
            // in place , participant trigger and trigger over target
            b.words("in");
            b.role(pick(rng, PLACES), Place);
            b.words(",");
            b.role(pick(rng, PARTICIPANTS), Participant);
            b.role(pick(rng, TRIGGERS), Trigger);
            b.words("and");
            b.role(pick(rng, TRIGGERS), Trigger);
            b.words("over");
            b.role(pick(rng, TARGETS), Target);
        }
        8 => {
            // police said participant trigger time
            b.words("police said");
            b.role(pick(rng, PARTICIPANTS), Participant);
            b.role(pick(rng, TRIGGERS), Trigger);
            b.role(pick(rng, TIMES), Etime);
            b.words("in");
            b.role(pick(rng, PLACES), Place);
        }
        _ => {
            b.words(pick(rng, FILLER));
        }
    }
    b.words(".");
    (b.tokens, b.tags)
}

/// `count` sentences with ids `{prefix}-{index}`, deterministic in `seed`.
pub fn template_corpus(count: usize, seed: u64, prefix: &str) -> Vec<AnnotatedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (tokens, tags) = sentence(&mut rng);
            AnnotatedSentence::new(format!("{prefix}-{i}"), tokens, tags)
                .expect("templates produce valid sentences")
                .0
                .with_doc(Some(format!("{prefix}-doc-{}", i / 4)))
        })
        .collect()
}

/// Vocabulary size of the templates.
pub fn vocabulary_size() -> usize {
    let mut words = alloc::collections::BTreeSet::new();
    let banks = [PARTICIPANTS, TRIGGERS, TARGETS, PLACES, TIMES, ORGANIZERS, FACILITIES, FILLER];
    for bank in banks {
        for phrase in bank {
            words.extend(phrase.split(' '));
        }
    }
    words.extend(["against", "in", "and", "led", "by", "outside", "over", "police", "said", ",", "."]);
    words.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_repaired_free() {
        let a = template_corpus(50, 9, "t");
        let b = template_corpus(50, 9, "t");
        assert_eq!(a, b);
        for s in &a {
            let mut tags = s.tags.clone();
            assert_eq!(crate::corpus::repair_tags(&mut tags), 0);
        }
    }

    #[test]
    fn vocabulary_is_about_two_hundred() {
        let v = vocabulary_size();
        assert!((150..=250).contains(&v), "{v}");
    }
}
