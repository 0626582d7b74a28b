//! Loading `.lp` programs and resolving `FILE:NAME` references.

use std::path::Path;
use std::sync::Arc;

use protogame::game::{Engine, PoolPolicy};
use protogame::syntax::SourceText;
use protogame::{expand_sugar, normalize, parse_program, print_formula, print_surface, Formula, Program};
use serde::Serialize;
use thiserror::Error;

/// The example corpus shipped with the engine.
pub const BUNDLED: &str = include_str!("../../core/corpus/examples.lp");
pub const BUNDLED_ORIGIN: &str = "examples.lp";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Syntax(#[from] protogame::syntax::SyntaxError),
    #[error("{origin}: no formula named `{name}`")]
    UnknownName { origin: String, name: String },
    #[error("{origin}: formula `{name}`: {message}")]
    Ill { origin: String, name: String, message: String },
}

/// A parsed program together with its source text.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub origin: String,
    pub text: String,
    pub program: Program,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub text: String,
    pub normal_form: String,
    pub description: String,
}

impl Catalog {
    pub fn parse(text: &str, origin: &str) -> Result<Catalog, LoadError> {
        let program = parse_program(&SourceText::new(text, origin))?;
        Ok(Catalog { origin: origin.to_string(), text: text.to_string(), program })
    }

    pub fn bundled() -> Catalog {
        Catalog::parse(BUNDLED, BUNDLED_ORIGIN).expect("bundled corpus parses")
    }

    pub fn load(path: &Path) -> Result<Catalog, LoadError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
        Catalog::parse(&text, &path.display().to_string())
    }

    pub fn engine(&self, policy: PoolPolicy) -> Engine {
        Engine::new(Arc::new(self.program.signature.clone()), policy)
    }

    /// Sugar-free core formula of a named entry.
    pub fn formula(&self, name: &str) -> Result<Formula, LoadError> {
        let f = self
            .program
            .get(name)
            .ok_or_else(|| LoadError::UnknownName { origin: self.origin.clone(), name: name.to_string() })?;
        expand_sugar(f, &self.program.signature).map_err(|e| LoadError::Ill {
            origin: self.origin.clone(),
            name: name.to_string(),
            message: e.to_string(),
        })
    }

    /// Normal form of a named entry, as a formula.
    pub fn root(&self, name: &str) -> Result<Formula, LoadError> {
        let f = self.formula(name)?;
        if !f.is_closed() {
            return Err(LoadError::Ill {
                origin: self.origin.clone(),
                name: name.to_string(),
                message: "formula is not closed".into(),
            });
        }
        Ok(normalize(&f).to_formula())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.program.formulas.keys().map(String::as_str)
    }

    pub fn entries(&self) -> Vec<CatalogEntry> {
        self.program
            .formulas
            .iter()
            .map(|(name, f)| CatalogEntry {
                name: name.clone(),
                text: print_surface(f),
                normal_form: self.root(name).map(|r| print_formula(&r)).unwrap_or_default(),
                description: describe(name).to_string(),
            })
            .collect()
    }
}

/// One-line protocol reading of the bundled formulas.
pub fn describe(name: &str) -> &'static str {
    match name {
        "p_implies_p" => "the receiver echoes the sender's single message",
        "qq_p_p" => "the receiver answers a question with a question",
        "peirce" => "the receiver re-asks the sender for its first claim",
        "ex4" => "a broadcast P(x) for every x, queried at one point",
        "drinker" => "one packet: header offer, packet, acknowledgement",
        "one_packet" => "one packet, header chosen up front",
        "two_packets" => "two packets sent in sequence, each acknowledged",
        "typed_packets" => "n packets, n chosen by the sender",
        "typed_ack_count" => "n packets with the packet count acknowledged",
        "typed_simple" => "n packets with a shared count header",
        "p_implies_q" => "the receiver cannot answer; the only play loops forever",
        "p_alone" => "the receiver has nothing to answer with",
        "exists_to_forall" => "one sample packet does not cover every header",
        "forall_p" => "the receiver must produce P for a header it never saw",
        _ => "",
    }
}

/// Splits `FILE:NAME`. A bare `NAME` refers to the bundled corpus when no
/// such file exists.
pub fn split_ref(spec: &str) -> (Option<&str>, Option<&str>) {
    match spec.rsplit_once(':') {
        Some((file, name)) if !file.is_empty() && !name.is_empty() => (Some(file), Some(name)),
        _ if spec.ends_with(".lp") || Path::new(spec).exists() => (Some(spec), None),
        _ => (None, Some(spec)),
    }
}

/// Loads the catalog a reference points to and the name it selects.
pub fn resolve(spec: &str) -> Result<(Catalog, Option<String>), LoadError> {
    let (file, name) = split_ref(spec);
    let catalog = match file {
        Some(f) => Catalog::load(Path::new(f))?,
        None => Catalog::bundled(),
    };
    Ok((catalog, name.map(str::to_string)))
}
