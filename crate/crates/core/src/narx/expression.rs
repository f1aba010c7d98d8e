use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grammar::names::*;
use super::NarxError;
use crate::tag::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    /// `u`
    Input,
    /// `y`
    Output,
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Input => "u",
            Signal::Output => "y",
        })
    }
}

/// `signal[k - delay] ^ exponent`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub signal: Signal,
    pub delay: usize,
    pub exponent: u32,
}

impl Factor {
    pub fn new(signal: Signal, delay: usize, exponent: u32) -> Self {
        Self { signal, delay, exponent }
    }

    pub fn input(delay: usize) -> Self {
        Self::new(Signal::Input, delay, 1)
    }

    pub fn output(delay: usize) -> Self {
        Self::new(Signal::Output, delay, 1)
    }

    pub fn pow(self, exponent: u32) -> Self {
        Self { exponent, ..self }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.delay {
            0 => write!(f, "{}[k]", self.signal)?,
            d => write!(f, "{}[k-{d}]", self.signal)?,
        }
        if self.exponent != 1 {
            write!(f, "^{}", self.exponent)?;
        }
        Ok(())
    }
}

/// Monomial in delayed signals; one model parameter multiplies it.
/// Factors are sorted by `(signal, delay)` and each pair occurs once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Factor>", into = "Vec<Factor>")]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    /// Merges repeated `(signal, delay)` pairs into exponents.
    pub fn new(factors: impl IntoIterator<Item = Factor>) -> Result<Self, NarxError> {
        let mut merged: BTreeMap<(Signal, usize), u32> = BTreeMap::new();
        for f in factors {
            if f.exponent == 0 {
                return Err(NarxError::ZeroExponent);
            }
            *merged.entry((f.signal, f.delay)).or_default() += f.exponent;
        }
        if merged.is_empty() {
            return Err(NarxError::EmptyTerm);
        }
        let factors: Vec<Factor> =
            merged.into_iter().map(|((signal, delay), exponent)| Factor { signal, delay, exponent }).collect();
        if let Some(f) = factors.iter().find(|f| f.signal == Signal::Output && f.delay == 0) {
            return Err(NarxError::NonCausalOutput(f.to_string()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Total polynomial degree.
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    pub fn max_delay(&self) -> usize {
        self.factors.iter().map(|f| f.delay).max().unwrap_or(0)
    }
}

impl TryFrom<Vec<Factor>> for Term {
    type Error = NarxError;

    fn try_from(v: Vec<Factor>) -> Result<Self, Self::Error> {
        Term::new(v)
    }
}

impl From<Term> for Vec<Factor> {
    fn from(t: Term) -> Self {
        t.factors
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, factor) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{factor}")?;
        }
        Ok(())
    }
}

/// Canonical right-hand side of a polynomial NARX model: a sorted set of
/// distinct monomials plus the additive noise flag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NarxExpression {
    terms: Vec<Term>,
    noise_term: bool,
}

impl NarxExpression {
    /// Sorts the terms and collapses duplicates.
    pub fn new(terms: impl IntoIterator<Item = Term>, noise_term: bool) -> Self {
        let mut terms: Vec<Term> = terms.into_iter().collect();
        terms.sort();
        terms.dedup();
        Self { terms, noise_term }
    }

    /// `y_k = ξ_k`
    pub fn noise_only() -> Self {
        Self::new([], true)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn noise_term(&self) -> bool {
        self.noise_term
    }

    /// Largest delay over all factors; 0 for the empty expression.
    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(Term::max_delay).max().unwrap_or(0)
    }

    pub fn has_output_factors(&self) -> bool {
        self.terms.iter().flat_map(Term::factors).any(|f| f.signal == Signal::Output)
    }

    /// Position of `term` among the canonical terms.
    pub fn position(&self, term: &Term) -> Option<usize> {
        self.terms.binary_search(term).ok()
    }

    /// Token sequence in the grammar's string language.
    pub fn to_yield(&self) -> Vec<Symbol> {
        let tok = Symbol::terminal;
        let mut out = Vec::new();
        if self.noise_term {
            out.push(tok(NOISE));
        }
        for term in &self.terms {
            out.extend([tok(PLUS), tok(COEFF)]);
            for f in term.factors() {
                for _ in 0..f.exponent {
                    out.push(tok(TIMES));
                    out.extend(std::iter::repeat_n(tok(DELAY), f.delay));
                    out.push(tok(match f.signal {
                        Signal::Input => INPUT,
                        Signal::Output => OUTPUT,
                    }));
                }
            }
        }
        out
    }
}

impl fmt::Display for NarxExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        match (self.terms.is_empty(), self.noise_term) {
            (true, true) => f.write_str("xi[k]"),
            (false, true) => f.write_str(" + xi[k]"),
            (true, false) => f.write_str("0"),
            (false, false) => Ok(()),
        }
    }
}

impl FromStr for NarxExpression {
    type Err = NarxError;

    /// Parses the printed form, e.g. `u[k-1] + y[k-1]^3 + xi[k]`. Coefficients
    /// are rejected; see [`parse_polynomial`] for models.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let poly = parse_polynomial(s)?;
        if poly.terms.iter().any(|(c, _)| c.is_some()) {
            return Err(NarxError::Syntax { position: 0, reason: "unexpected coefficient".into() });
        }
        Ok(Self::new(poly.terms.into_iter().map(|(_, t)| t), poly.noise_term))
    }
}

fn malformed(position: usize, reason: impl Into<String>) -> NarxError {
    NarxError::MalformedYield { position, reason: reason.into() }
}

/// Groups a yield of the NARX grammar into a canonical expression.
///
/// Terms are split on `+`, factors on `×`; the `q⁻¹` tokens in front of a
/// signal give its delay. Repeated factors become exponents and repeated
/// monomials collapse.
pub fn parse_yield(leaves: &[Symbol]) -> Result<NarxExpression, NarxError> {
    let name_at = |i: usize| -> Option<&str> { leaves.get(i).map(Symbol::name) };
    if let Some((i, s)) = leaves.iter().enumerate().find(|(_, s)| !s.is_terminal()) {
        return Err(malformed(i, format!("nonterminal `{s}` in yield")));
    }
    if name_at(0) != Some(NOISE) {
        return Err(malformed(0, "yield must start with ξ"));
    }
    let mut pos = 1;
    let mut terms = Vec::new();
    while pos < leaves.len() {
        if name_at(pos) != Some(PLUS) {
            return Err(malformed(pos, "expected `+`"));
        }
        if name_at(pos + 1) != Some(COEFF) {
            return Err(malformed(pos + 1, "expected `c`"));
        }
        pos += 2;
        let mut factors = Vec::new();
        while name_at(pos) == Some(TIMES) {
            pos += 1;
            let mut delay = 0;
            while name_at(pos) == Some(DELAY) {
                delay += 1;
                pos += 1;
            }
            let signal = match name_at(pos) {
                Some(INPUT) => Signal::Input,
                Some(OUTPUT) if delay == 0 => {
                    return Err(malformed(pos, "output factor without delay"));
                }
                Some(OUTPUT) => Signal::Output,
                _ => return Err(malformed(pos, "expected `u` or `y`")),
            };
            factors.push(Factor::new(signal, delay, 1));
            pos += 1;
        }
        if factors.is_empty() {
            return Err(malformed(pos, "term without factors"));
        }
        terms.push(Term::new(factors).map_err(|e| malformed(pos, e.to_string()))?);
    }
    Ok(NarxExpression::new(terms, true))
}

/// Splits a whitespace-separated token string into grammar terminals.
/// ASCII aliases `xi`, `*` and `q^-1` are accepted.
pub fn tokens(s: &str) -> Vec<Symbol> {
    s.split_whitespace()
        .map(|tok| {
            Symbol::terminal(match tok {
                "xi" => NOISE,
                "*" | "x" => TIMES,
                "q^-1" | "q-1" => DELAY,
                other => other,
            })
        })
        .collect()
}

/// Result of [`parse_polynomial`]: terms in written order with their
/// optional signed coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPolynomial {
    pub terms: Vec<(Option<f64>, Term)>,
    pub noise_term: bool,
}

/// Parses `[coef*]factor*factor ± ... [+ xi[k]]` where a factor is
/// `u[k]`, `u[k-3]`, `y[k-1]^2`.
pub fn parse_polynomial(s: &str) -> Result<ParsedPolynomial, NarxError> {
    let mut p = PolyParser { chars: s.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0 };
    let mut out = ParsedPolynomial { terms: Vec::new(), noise_term: false };
    if p.chars.is_empty() {
        return Err(p.err("empty expression"));
    }
    let mut sign = match p.peek() {
        Some('-') => {
            p.pos += 1;
            -1.0
        }
        Some('+') => {
            p.pos += 1;
            1.0
        }
        _ => 1.0,
    };
    loop {
        if p.eat_str("xi[k]") {
            if out.noise_term {
                return Err(p.err("xi[k] appears twice"));
            }
            if sign < 0.0 {
                return Err(p.err("xi[k] cannot be negated"));
            }
            out.noise_term = true;
        } else {
            let coef = if matches!(p.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
                let c = p.number()?;
                if !p.eat('*') {
                    return Err(p.err("expected `*` after coefficient"));
                }
                Some(sign * c)
            } else if sign < 0.0 {
                Some(-1.0)
            } else {
                None
            };
            let mut factors = vec![p.factor()?];
            while p.eat('*') {
                factors.push(p.factor()?);
            }
            out.terms.push((coef, Term::new(factors)?));
        }
        match p.peek() {
            None => break,
            Some('+') => sign = 1.0,
            Some('-') => sign = -1.0,
            Some(c) => return Err(p.err(format!("unexpected `{c}`"))),
        }
        p.pos += 1;
    }
    Ok(out)
}

struct PolyParser {
    chars: Vec<char>,
    pos: usize,
}

impl PolyParser {
    fn err(&self, reason: impl Into<String>) -> NarxError {
        NarxError::Syntax { position: self.pos, reason: reason.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<usize, NarxError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().map_err(|_| self.err("expected integer"))
    }

    fn number(&mut self) -> Result<f64, NarxError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.err(format!("bad number `{text}`")))
    }

    fn factor(&mut self) -> Result<Factor, NarxError> {
        let signal = match self.peek() {
            Some('u') => Signal::Input,
            Some('y') => Signal::Output,
            _ => return Err(self.err("expected `u[...]` or `y[...]`")),
        };
        self.pos += 1;
        if !self.eat_str("[k") {
            return Err(self.err("expected `[k`"));
        }
        let delay = if self.eat('-') { self.integer()? } else { 0 };
        if !self.eat(']') {
            return Err(self.err("expected `]`"));
        }
        let exponent = if self.eat('^') { self.integer()? } else { 1 };
        let exponent = u32::try_from(exponent).map_err(|_| self.err("exponent too large"))?;
        Ok(Factor::new(signal, delay, exponent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_only_yield() {
        let e = parse_yield(&tokens("ξ")).unwrap();
        assert_eq!(e.term_count(), 0);
        assert!(e.noise_term());
        assert_eq!(e, NarxExpression::noise_only());
    }

    #[test]
    fn repeated_factor_becomes_exponent() {
        let e = parse_yield(&tokens("ξ + c × q⁻¹ u × q⁻¹ u")).unwrap();
        assert_eq!(e.terms(), &[Term::new([Factor::new(Signal::Input, 1, 2)]).unwrap()]);
    }

    #[test]
    fn cubic_output_term() {
        let e = parse_yield(&tokens("ξ + c × q⁻¹ y × q⁻¹ y × q⁻¹ y")).unwrap();
        assert_eq!(e.terms()[0].factors(), &[Factor::output(1).pow(3)]);
        assert_eq!(e.to_string(), "y[k-1]^3 + xi[k]");
    }

    #[test]
    fn duplicate_monomials_collapse() {
        let e = parse_yield(&tokens("ξ + c × u × q⁻¹ y + c × q⁻¹ y × u")).unwrap();
        assert_eq!(e.term_count(), 1);
    }

    #[test]
    fn malformed_yields() {
        for bad in ["", "+ c × u", "ξ + c", "ξ + c × y", "ξ + × u", "ξ c × u", "ξ + c × q⁻¹", "ξ ξ"] {
            assert!(
                matches!(parse_yield(&tokens(bad)), Err(NarxError::MalformedYield { .. })),
                "{bad:?} should be rejected"
            );
        }
        let with_nt = vec![Symbol::terminal("ξ"), Symbol::nonterminal("expr0")];
        assert!(parse_yield(&with_nt).is_err());
    }

    #[test]
    fn yield_round_trip_is_idempotent() {
        let e = parse_yield(&tokens("ξ + c × q⁻¹ q⁻¹ y × u + c × u + c × q⁻¹ u × q⁻¹ u")).unwrap();
        let again = parse_yield(&e.to_yield()).unwrap();
        assert_eq!(again, e);
        assert_eq!(parse_yield(&again.to_yield()).unwrap(), again);
    }

    #[test]
    fn printed_form_parses_back() {
        let e: NarxExpression = "u[k-1] + u[k] + y[k-3] + y[k-2] + y[k-1] + y[k-1]^3 + xi[k]".parse().unwrap();
        assert_eq!(e.term_count(), 6);
        assert_eq!(e.max_lag(), 3);
        assert_eq!(e.to_string().parse::<NarxExpression>().unwrap(), e);
        assert_eq!(e.to_string(), "u[k] + u[k-1] + y[k-1] + y[k-1]^3 + y[k-2] + y[k-3] + xi[k]");
    }

    #[test]
    fn polynomial_with_coefficients() {
        let p = parse_polynomial("0.3694*u[k-1] + 0.0467*u[k] - 1.3923*y[k-1]^3 - y[k-2] + xi[k]").unwrap();
        let coefs: Vec<Option<f64>> = p.terms.iter().map(|(c, _)| *c).collect();
        assert_eq!(coefs, vec![Some(0.3694), Some(0.0467), Some(-1.3923), Some(-1.0)]);
        assert!(p.noise_term);
        assert!(parse_polynomial("1e-3*u[k]").is_ok());
        assert!(parse_polynomial("u[k] +").is_err());
        assert!(parse_polynomial("y[k]").is_err());
        assert!("0.5*u[k]".parse::<NarxExpression>().is_err());
    }

    #[test]
    fn causality_enforced_on_terms() {
        assert!(matches!(Term::new([Factor::output(0)]), Err(NarxError::NonCausalOutput(_))));
        assert!(matches!(Term::new([]), Err(NarxError::EmptyTerm)));
    }
}
