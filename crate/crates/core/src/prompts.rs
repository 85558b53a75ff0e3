//! Training prompt set.
//!
//! Prompts have the form `[article] adjective noun [suffix]`. The article is
//! either absent or `"an"`; the suffixes ". uniformly blank" and
//! ". uniformly blank, straight edges" are only used with the article. That
//! gives 2 x 4 prompts without article plus 2 x 4 x 3 with it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INFERENCE_PROMPT: &str = "empty room";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptGrammar {
    /// Optional articles; the empty string means "no article".
    pub articles: Vec<String>,
    pub adjectives: Vec<String>,
    pub nouns: Vec<String>,
    /// Suffix stems concatenated cumulatively: `[P]`, `[P, Q]` -> `P`, `PQ`.
    pub suffixes: Vec<String>,
}

impl Default for PromptGrammar {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            articles: s(&["", "an"]),
            adjectives: s(&["empty", "unfurnished"]),
            nouns: s(&["room", "space", "home", "house"]),
            suffixes: s(&[". uniformly blank", ", straight edges"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    prompts: Vec<String>,
    inference_prompt: String,
}

impl PromptSet {
    /// A custom prompt list (e.g. for prompt-count sweeps).
    pub fn from_list(prompts: Vec<String>, inference_prompt: impl Into<String>) -> Result<Self> {
        let inference_prompt = inference_prompt.into();
        if prompts.is_empty() {
            return Err(Error::param("prompt set is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &prompts {
            if !seen.insert(p.as_str()) {
                return Err(Error::param(format!("duplicate prompt `{p}`")));
            }
        }
        if !seen.contains(inference_prompt.as_str()) {
            return Err(Error::param(format!(
                "inference prompt `{inference_prompt}` is not in the set"
            )));
        }
        Ok(Self {
            prompts,
            inference_prompt,
        })
    }

    pub fn prompts(&self) -> &[String] {
        &self.prompts
    }

    pub fn inference_prompt(&self) -> &str {
        &self.inference_prompt
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }
}

/// Enumerates the grammar in lexicographic order of the grammar's own
/// component order (article, adjective, noun, suffix).
pub fn enumerate_prompts(grammar: &PromptGrammar) -> Result<PromptSet> {
    let mut prompts = Vec::new();
    for article in &grammar.articles {
        // No suffix is always allowed; suffixed forms need an article.
        let mut tails = vec![String::new()];
        if !article.is_empty() {
            let mut acc = String::new();
            for stem in &grammar.suffixes {
                acc.push_str(stem);
                tails.push(acc.clone());
            }
        }
        for adjective in &grammar.adjectives {
            for noun in &grammar.nouns {
                for tail in &tails {
                    let mut p = String::new();
                    if !article.is_empty() {
                        p.push_str(article);
                        p.push(' ');
                    }
                    p.push_str(adjective);
                    p.push(' ');
                    p.push_str(noun);
                    p.push_str(tail);
                    prompts.push(p);
                }
            }
        }
    }
    PromptSet::from_list(prompts, INFERENCE_PROMPT)
}

/// The 32-prompt training set.
pub fn default_prompt_set() -> PromptSet {
    enumerate_prompts(&PromptGrammar::default()).expect("default grammar is valid")
}

/// Uniform draw from the set, a pure function of `(seed, sample_index)`.
///
/// Callers fold the epoch into `sample_index` (e.g. `epoch * n + i`) so a
/// sample can receive different prompts in different epochs.
pub fn sample_prompt(set: &PromptSet, seed: u64, sample_index: u64) -> Result<&str> {
    if set.is_empty() {
        return Err(Error::param("cannot sample from an empty prompt set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    let i = rng.random_range(0..set.len());
    Ok(&set.prompts[i])
}
