use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ManeuverKind, ManeuverSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseError {
    #[error("empty command")]
    Empty,
    #[error("unknown words: {}", unmatched.join(", "))]
    UnknownTokens { unmatched: Vec<String> },
    #[error("no motion verb in command")]
    MissingVerb,
    #[error("command does not mention the ring")]
    MissingObject,
    #[error("conflicting directions: {}", unmatched.join(", "))]
    Conflicting { unmatched: Vec<String> },
    #[error("command gives no direction")]
    NoDirection,
}

impl ParseError {
    /// Tokens the caller should highlight.
    pub fn unmatched(&self) -> &[String] {
        match self {
            ParseError::UnknownTokens { unmatched } | ParseError::Conflicting { unmatched } => unmatched,
            _ => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordClass {
    Verb,
    Object,
    Left,
    Right,
    Through,
    Center,
    Around,
    Filler,
}

/// Closed vocabulary plus the prompt templates the dataset draws from.
/// Words outside the lexicon make a command unparseable.
#[derive(Clone, Debug)]
pub struct CommandGrammar {
    lexicon: Vec<(&'static str, WordClass)>,
}

const VERBS: &[&str] = &[
    "fly", "go", "pass", "move", "navigate", "head", "travel", "steer", "proceed", "maneuver", "manoeuvre", "cross",
];
const OBJECTS: &[&str] = &["ring", "hoop", "loop", "gate"];
const LEFTS: &[&str] = &["left", "port"];
const RIGHTS: &[&str] = &["right", "starboard"];
const THROUGHS: &[&str] = &["through", "thru", "via"];
const CENTERS: &[&str] = &["center", "centre", "middle"];
const AROUNDS: &[&str] = &["around", "round", "past", "by", "beside", "outside"];
const FILLERS: &[&str] = &[
    "the", "a", "an", "of", "on", "to", "from", "at", "its", "side", "hand", "please", "now", "and", "drone", "then",
    "over", "into", "straight", "moving", "s",
];

impl Default for CommandGrammar {
    fn default() -> Self {
        let mut lexicon = Vec::new();
        for (words, class) in [
            (VERBS, WordClass::Verb),
            (OBJECTS, WordClass::Object),
            (LEFTS, WordClass::Left),
            (RIGHTS, WordClass::Right),
            (THROUGHS, WordClass::Through),
            (CENTERS, WordClass::Center),
            (AROUNDS, WordClass::Around),
            (FILLERS, WordClass::Filler),
        ] {
            lexicon.extend(words.iter().map(|w| (*w, class)));
        }
        Self { lexicon }
    }
}

/// Prompt skeletons. `{verb}`, `{obj}` and `{the}` are filled from the
/// lexicon; everything else is literal.
const LEFT_TEMPLATES: &[&str] = &[
    "{Verb} left of {the} {obj}",
    "{verb} around {the} {obj} on the left",
    "{Verb} past the left side of {the} {obj}",
    "please {verb} to the left of {the} {obj}",
    "{Verb} around {the} moving {obj} from the left",
    "{Verb} by the {obj} on its left hand side",
    "left of {the} {obj}, {verb} now",
];
const CENTER_TEMPLATES: &[&str] = &[
    "{Verb} through center of {the} {obj}",
    "{verb} through the middle of {the} {obj}",
    "{Verb} straight through {the} {obj}",
    "please {verb} through {the} moving {obj}",
    "{Verb} via the centre of {the} {obj}",
    "{verb} into {the} {obj} and through the center",
    "thru the middle of {the} {obj}, {verb} now",
];
const RIGHT_TEMPLATES: &[&str] = &[
    "{Verb} right of {the} {obj}",
    "{verb} around {the} {obj} on the right",
    "{Verb} past the right side of {the} {obj}",
    "please {verb} to the right of {the} {obj}",
    "{Verb} around {the} moving {obj} from the right",
    "{Verb} by the {obj} on its right hand side",
    "right of {the} {obj}, {verb} now",
];

impl CommandGrammar {
    pub fn classify(&self, word: &str) -> Option<WordClass> {
        self.lexicon.iter().find(|(w, _)| *w == word).map(|(_, c)| *c)
    }

    pub fn words(&self, class: WordClass) -> impl Iterator<Item = &'static str> + '_ {
        self.lexicon.iter().filter(move |(_, c)| *c == class).map(|(w, _)| *w)
    }

    pub fn templates(&self, kind: ManeuverKind) -> &'static [&'static str] {
        match kind {
            ManeuverKind::AroundLeft => LEFT_TEMPLATES,
            ManeuverKind::ThroughCenter => CENTER_TEMPLATES,
            ManeuverKind::AroundRight => RIGHT_TEMPLATES,
        }
    }

    /// Fills a template with the given lexicon choices.
    pub fn realize(&self, template: &str, verb: &str, object: &str, article: bool) -> String {
        let mut cap = verb.to_string();
        if let Some(first) = cap.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        template
            .replace("{Verb}", &cap)
            .replace("{verb}", verb)
            .replace("{obj}", object)
            .replace("{the} ", if article { "the " } else { "" })
    }

    /// A random prompt for `kind`: template, verb, object and article
    /// each drawn uniformly.
    pub fn sample_prompt<R: Rng + ?Sized>(&self, kind: ManeuverKind, rng: &mut R) -> String {
        let template = self.templates(kind).choose(rng).expect("templates");
        let verbs: Vec<&str> = self.words(WordClass::Verb).collect();
        let objects: Vec<&str> = self.words(WordClass::Object).collect();
        let verb = verbs.choose(rng).expect("verbs");
        let object = objects.choose(rng).expect("objects");
        self.realize(template, verb, object, rng.random_bool(0.5))
    }

    pub fn parse(&self, text: &str) -> Result<ManeuverSpec, ParseError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut unknown = Vec::new();
        let mut seen: Vec<(String, WordClass)> = Vec::new();
        for tok in tokens {
            match self.classify(&tok) {
                Some(c) => seen.push((tok, c)),
                None => unknown.push(tok),
            }
        }
        if !unknown.is_empty() {
            return Err(ParseError::UnknownTokens { unmatched: unknown });
        }
        let has = |c: WordClass| seen.iter().any(|(_, k)| *k == c);
        if !has(WordClass::Verb) {
            return Err(ParseError::MissingVerb);
        }
        if !has(WordClass::Object) {
            return Err(ParseError::MissingObject);
        }
        let (left, right) = (has(WordClass::Left), has(WordClass::Right));
        let through = has(WordClass::Through) || has(WordClass::Center);
        let directional: Vec<String> = seen
            .iter()
            .filter(|(_, c)| matches!(c, WordClass::Left | WordClass::Right | WordClass::Through | WordClass::Center))
            .map(|(w, _)| w.clone())
            .collect();
        let kind = match (left, right, through) {
            (true, false, false) => ManeuverKind::AroundLeft,
            (false, true, false) => ManeuverKind::AroundRight,
            (false, false, true) if !has(WordClass::Around) => ManeuverKind::ThroughCenter,
            (false, false, false) => return Err(ParseError::NoDirection),
            _ => {
                let mut unmatched = directional;
                if has(WordClass::Around) && through {
                    unmatched.extend(seen.iter().filter(|(_, c)| *c == WordClass::Around).map(|(w, _)| w.clone()));
                }
                return Err(ParseError::Conflicting { unmatched });
            }
        };
        Ok(ManeuverSpec::new(kind))
    }
}

/// Lower-cases and splits on anything that is not a letter or digit.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn parse_command(text: &str) -> Result<ManeuverSpec, ParseError> {
    CommandGrammar::default().parse(text)
}
