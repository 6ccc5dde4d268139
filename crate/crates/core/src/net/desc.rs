//! Network descriptions and their compact text grammar.
//!
//! Layers are dash-separated tokens:
//!
//! ```text
//! 64Conv(encoding)-MP2-64Conv-MP2-128fc-10fc
//! ```
//!
//! `<N>Conv(encoding)` and `<N>Conv` default to 3x3 kernels with one pixel of
//! zero padding, `<N>fc` is fully connected and `MP2` is 2x2 max pooling. Any
//! compute token may carry attributes, e.g. `16Conv{k=1,pad=0,vth=0.5}`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_KERNEL: usize = 3;
pub const DEFAULT_VTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    EncodingConv,
    Conv,
    MaxPool2,
    Fc,
}

impl LayerKind {
    pub fn is_compute(&self) -> bool {
        !matches!(self, LayerKind::MaxPool2)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::EncodingConv => "encoding-conv",
            LayerKind::Conv => "conv",
            LayerKind::MaxPool2 => "maxpool2",
            LayerKind::Fc => "fc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output channels (neurons for fc); zero for pooling.
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub padding: usize,
    pub v_th: f64,
}

impl LayerSpec {
    pub fn conv(out_channels: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            out_channels,
            kernel: (DEFAULT_KERNEL, DEFAULT_KERNEL),
            padding: DEFAULT_KERNEL / 2,
            v_th: DEFAULT_VTH,
        }
    }

    pub fn encoding(out_channels: usize) -> Self {
        Self { kind: LayerKind::EncodingConv, ..Self::conv(out_channels) }
    }

    pub fn fc(neurons: usize) -> Self {
        Self { kind: LayerKind::Fc, out_channels: neurons, kernel: (1, 1), padding: 0, v_th: DEFAULT_VTH }
    }

    pub fn maxpool2() -> Self {
        Self { kind: LayerKind::MaxPool2, out_channels: 0, kernel: (2, 2), padding: 0, v_th: 0.0 }
    }

    pub fn with_kernel(mut self, k: usize, padding: usize) -> Self {
        self.kernel = (k, k);
        self.padding = padding;
        self
    }

    pub fn with_vth(mut self, v_th: f64) -> Self {
        self.v_th = v_th;
        self
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::MaxPool2 => return write!(f, "MP2"),
            LayerKind::EncodingConv => write!(f, "{}Conv(encoding)", self.out_channels)?,
            LayerKind::Conv => write!(f, "{}Conv", self.out_channels)?,
            LayerKind::Fc => write!(f, "{}fc", self.out_channels)?,
        }
        let mut attrs = Vec::new();
        if self.kind != LayerKind::Fc
            && (self.kernel != (DEFAULT_KERNEL, DEFAULT_KERNEL) || self.padding != DEFAULT_KERNEL / 2)
        {
            attrs.push(format!("k={}", self.kernel.0));
            attrs.push(format!("pad={}", self.padding));
        }
        if self.v_th != DEFAULT_VTH {
            attrs.push(format!("vth={}", self.v_th));
        }
        if !attrs.is_empty() {
            write!(f, "{{{}}}", attrs.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDescription {
    pub layers: Vec<LayerSpec>,
}

impl NetworkDescription {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        Self { layers }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Indices of layers that carry weights.
    pub fn compute_layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers.iter().enumerate().filter(|(_, l)| l.kind.is_compute()).map(|(i, _)| i)
    }
}

impl fmt::Display for NetworkDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty network")]
    Empty,
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("bad attribute `{0}`")]
    BadAttribute(String),
    #[error("encoding layer must be the first layer")]
    EncodingNotFirst,
    #[error("first layer must be an encoding layer")]
    MissingEncoding,
    #[error("{0}")]
    ChainBreak(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize, usize)> = None;
    let (mut line, mut column) = (1, 1);
    let mut depth = 0usize;
    for (i, ch) in text.char_indices() {
        let separator = depth == 0 && (ch == '-' || ch.is_whitespace());
        match (separator, start) {
            (true, Some((s, l, c))) => {
                tokens.push(Token { text: &text[s..i], line: l, column: c });
                start = None;
            }
            (false, None) => start = Some((i, line, column)),
            _ => {}
        }
        match ch {
            '(' | '{' => depth += 1,
            ')' | '}' => depth = depth.saturating_sub(1),
            _ => {}
        }
        if ch == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    if let Some((s, l, c)) = start {
        tokens.push(Token { text: &text[s..], line: l, column: c });
    }
    tokens
}

fn parse_token(tok: &Token<'_>, default_vth: f64) -> Result<LayerSpec, ParseErrorKind> {
    let (head, attrs) = match tok.text.find('{') {
        Some(i) if tok.text.ends_with('}') => (&tok.text[..i], Some(&tok.text[i + 1..tok.text.len() - 1])),
        Some(_) => return Err(ParseErrorKind::UnknownToken(tok.text.to_string())),
        None => (tok.text, None),
    };
    let unknown = || ParseErrorKind::UnknownToken(tok.text.to_string());
    let mut spec = if head == "MP2" {
        LayerSpec::maxpool2()
    } else {
        let digits = head.chars().take_while(char::is_ascii_digit).count();
        let n: usize = head[..digits].parse().map_err(|_| unknown())?;
        if n == 0 {
            return Err(unknown());
        }
        match &head[digits..] {
            "Conv(encoding)" => LayerSpec::encoding(n),
            "Conv" => LayerSpec::conv(n),
            "fc" => LayerSpec::fc(n),
            _ => return Err(unknown()),
        }
        .with_vth(default_vth)
    };
    if let Some(attrs) = attrs {
        if spec.kind == LayerKind::MaxPool2 {
            return Err(ParseErrorKind::BadAttribute(attrs.to_string()));
        }
        for kv in attrs.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = || ParseErrorKind::BadAttribute(kv.to_string());
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            match (k.trim(), spec.kind) {
                ("vth", _) => {
                    spec.v_th = v.trim().parse().map_err(|_| bad())?;
                    if !spec.v_th.is_finite() {
                        return Err(bad());
                    }
                }
                ("k", LayerKind::Conv | LayerKind::EncodingConv) => {
                    let k: usize = v.trim().parse().map_err(|_| bad())?;
                    if k == 0 {
                        return Err(bad());
                    }
                    spec.kernel = (k, k);
                }
                ("pad", LayerKind::Conv | LayerKind::EncodingConv) => {
                    spec.padding = v.trim().parse().map_err(|_| bad())?;
                }
                _ => return Err(bad()),
            }
        }
    }
    Ok(spec)
}

/// Parses the dash-separated grammar with `v_th = 1.0` for unannotated layers.
pub fn parse_network(text: &str) -> Result<NetworkDescription, ParseError> {
    parse_network_with(text, DEFAULT_VTH)
}

pub fn parse_network_with(text: &str, default_vth: f64) -> Result<NetworkDescription, ParseError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(ParseError { line: 1, column: 1, kind: ParseErrorKind::Empty });
    }
    let mut layers: Vec<LayerSpec> = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        let at = |kind| ParseError { line: tok.line, column: tok.column, kind };
        let spec = parse_token(tok, default_vth).map_err(at)?;
        match (i, spec.kind) {
            (0, LayerKind::EncodingConv) => {}
            (0, _) => return Err(at(ParseErrorKind::MissingEncoding)),
            (_, LayerKind::EncodingConv) => return Err(at(ParseErrorKind::EncodingNotFirst)),
            _ => {}
        }
        if let Some(prev) = layers.last() {
            if prev.kind == LayerKind::Fc && matches!(spec.kind, LayerKind::Conv | LayerKind::MaxPool2) {
                return Err(at(ParseErrorKind::ChainBreak(format!(
                    "`{}` cannot follow a fully connected layer",
                    tok.text
                ))));
            }
        }
        layers.push(spec);
    }
    Ok(NetworkDescription { layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::presets::{CIFAR10_NET, MNIST_NET};

    #[test]
    fn mnist_string() {
        let net = parse_network(MNIST_NET).unwrap();
        let kinds: Vec<_> = net.layers.iter().map(|l| l.kind).collect();
        assert_eq!(
            kinds,
            [LayerKind::EncodingConv, LayerKind::MaxPool2, LayerKind::Conv, LayerKind::MaxPool2, LayerKind::Fc, LayerKind::Fc]
        );
        assert_eq!(net.layers[0].out_channels, 64);
        assert_eq!(net.layers[0].kernel, (3, 3));
        assert_eq!(net.layers[0].padding, 1);
        assert_eq!(net.layers[5].out_channels, 10);
        assert_eq!(net.to_string(), MNIST_NET);
    }

    #[test]
    fn cifar_string() {
        let net = parse_network(CIFAR10_NET).unwrap();
        assert_eq!(net.len(), 16);
        let channels: Vec<_> = net.compute_layers().map(|i| net.layers[i].out_channels).collect();
        assert_eq!(channels, [128, 128, 128, 192, 192, 192, 192, 256, 256, 256, 256, 256, 10]);
        assert_eq!(net.layers.iter().filter(|l| l.kind == LayerKind::MaxPool2).count(), 3);
        assert_eq!(net.to_string(), CIFAR10_NET);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(parse_network("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(parse_network("  \n ").unwrap_err().kind, ParseErrorKind::Empty);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_network("8Conv(encoding)-MP3").unwrap_err();
        assert_eq!((e.line, e.column), (1, 17));
        assert_eq!(e.kind, ParseErrorKind::UnknownToken("MP3".into()));

        let e = parse_network("8Conv(encoding)-\n  8Conv(encoding)").unwrap_err();
        assert_eq!((e.line, e.column, e.kind), (2, 3, ParseErrorKind::EncodingNotFirst));

        let e = parse_network("8Conv-MP2").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingEncoding);

        let e = parse_network("8Conv(encoding)-10fc-MP2").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ChainBreak(_)));
        assert_eq!(e.column, 22);
    }

    #[test]
    fn attributes() {
        let net = parse_network("4Conv(encoding){k=1,pad=0,vth=0.5}-3fc{vth=2}").unwrap();
        assert_eq!(net.layers[0].kernel, (1, 1));
        assert_eq!(net.layers[0].padding, 0);
        assert_eq!(net.layers[0].v_th, 0.5);
        assert_eq!(net.layers[1].v_th, 2.0);
        assert_eq!(net.to_string(), "4Conv(encoding){k=1,pad=0,vth=0.5}-3fc{vth=2}");
        assert!(parse_network("4Conv(encoding)-3fc{k=3}").is_err());
        assert!(parse_network("4Conv(encoding)-MP2{vth=1}").is_err());
        assert!(parse_network("4Conv(encoding){vth=abc}").is_err());
        assert!(parse_network("0Conv(encoding)").is_err());
    }

    #[test]
    fn default_vth_override() {
        let net = parse_network_with("4Conv(encoding)-2fc{vth=3}", 0.25).unwrap();
        assert_eq!(net.layers[0].v_th, 0.25);
        assert_eq!(net.layers[1].v_th, 3.0);
    }
}
