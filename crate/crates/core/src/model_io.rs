//! Model files and seeded random networks.
//!
//! The model format is line-oriented text:
//!
//! ```text
//! pnverify-model 1
//! kind ccp|ncp|ccp_conv
//! degree <N>
//! input <d>
//! hidden <k>
//! output <o>
//! meta <key> <value...>            (any number)
//! conv <n> <in_c> <out_c> <kh> <kw> <stride> <pad> <in_h> <in_w>   (ccp_conv only, n = 1..N)
//! array <name> <dim>...
//! <values, whitespace separated, row-major, any line breaks>
//! end
//! ```
//!
//! Arrays are `W1..WN` (d×k), `S2..SN` (k×k) and `b2..bN` (k) for NCP,
//! `K1..KN` (flat kernels) for ccp_conv, then `C` (o×k) and `beta` (o).
//! Values are written with 17 significant digits, so a save/load round trip
//! reproduces every weight bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::conv::{ConvCcpNetwork, ConvLayerSpec};
use crate::error::{Error, Result};
use crate::network::{CcpNetwork, NcpNetwork, Network};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "pnverify-model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ccp,
    Ncp,
    CcpConv,
}

impl ModelKind {
    fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ccp => "ccp",
            ModelKind::Ncp => "ncp",
            ModelKind::CcpConv => "ccp_conv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dense(Network),
    Conv(ConvCcpNetwork),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Dense(Network::Ccp(_)) => ModelKind::Ccp,
            Model::Dense(Network::Ncp(_)) => ModelKind::Ncp,
            Model::Conv(_) => ModelKind::CcpConv,
        }
    }

    /// The network to verify; convolutional models are lowered to dense.
    pub fn to_network(&self) -> Result<Network> {
        match self {
            Model::Dense(n) => Ok(n.clone()),
            Model::Conv(c) => Ok(c.to_dense()?.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub meta: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn new(model: impl Into<Model>) -> Self {
        Self {
            model: model.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (degree, d, k, o) = match &self.model {
            Model::Dense(n) => (n.degree(), n.input_dim(), n.hidden_dim(), n.output_dim()),
            Model::Conv(c) => (
                c.layers.len(),
                c.layers[0].0.input_len(),
                c.layers[0].0.output_len(),
                c.c.nrows(),
            ),
        };
        writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
        writeln!(out, "kind {}", self.model.kind().as_str()).unwrap();
        writeln!(out, "degree {degree}\ninput {d}\nhidden {k}\noutput {o}").unwrap();
        for (key, value) in &self.meta {
            writeln!(out, "meta {key} {value}").unwrap();
        }
        let (c, beta) = match &self.model {
            Model::Dense(Network::Ccp(n)) => {
                write_matrices(&mut out, "W", 1, n.weights());
                (n.c(), n.beta())
            }
            Model::Dense(Network::Ncp(n)) => {
                write_matrices(&mut out, "W", 1, n.weights());
                write_matrices(&mut out, "S", 2, n.s());
                for (i, b) in n.b().iter().enumerate() {
                    write_array(&mut out, &format!("b{}", i + 2), &[b.len()], b.iter());
                }
                (n.c(), n.beta())
            }
            Model::Conv(net) => {
                for (i, (s, _)) in net.layers.iter().enumerate() {
                    writeln!(
                        out,
                        "conv {} {} {} {} {} {} {} {} {}",
                        i + 1,
                        s.in_channels,
                        s.out_channels,
                        s.kernel_h,
                        s.kernel_w,
                        s.stride,
                        s.padding,
                        s.input_h,
                        s.input_w
                    )
                    .unwrap();
                }
                for (i, (_, kernel)) in net.layers.iter().enumerate() {
                    write_array(&mut out, &format!("K{}", i + 1), &[kernel.len()], kernel.iter());
                }
                (&net.c, &net.beta)
            }
        };
        write_array(&mut out, "C", &[c.nrows(), c.ncols()], c.iter());
        write_array(&mut out, "beta", &[beta.len()], beta.iter());
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }
}

impl From<Network> for Model {
    fn from(n: Network) -> Self {
        Model::Dense(n)
    }
}

impl From<CcpNetwork> for Model {
    fn from(n: CcpNetwork) -> Self {
        Model::Dense(n.into())
    }
}

impl From<NcpNetwork> for Model {
    fn from(n: NcpNetwork) -> Self {
        Model::Dense(n.into())
    }
}

impl From<ConvCcpNetwork> for Model {
    fn from(n: ConvCcpNetwork) -> Self {
        Model::Conv(n)
    }
}

fn write_matrices(out: &mut String, prefix: &str, first: usize, ms: &[Array2<f64>]) {
    for (i, m) in ms.iter().enumerate() {
        write_array(
            out,
            &format!("{prefix}{}", i + first),
            &[m.nrows(), m.ncols()],
            m.iter(),
        );
    }
}

fn write_array<'a>(out: &mut String, name: &str, dims: &[usize], values: impl Iterator<Item = &'a f64>) {
    out.push_str("array ");
    out.push_str(name);
    for d in dims {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    let mut col = 0;
    for v in values {
        if col > 0 {
            out.push(' ');
        }
        write!(out, "{v:.16e}").unwrap();
        col += 1;
        if col == 4 {
            out.push('\n');
            col = 0;
        }
    }
    if col > 0 {
        out.push('\n');
    }
}

pub fn save_model(file: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, file.to_text())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    ModelFile::parse(&std::fs::read_to_string(path)?)
}

/// Load a model file and lower it to the network used for verification.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    load_model(path)?.model.to_network()
}

struct RawArray {
    dims: Vec<usize>,
    values: Vec<f64>,
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

fn malformed(line: usize, message: impl Into<String>) -> Error {
    Error::MalformedFile {
        line,
        message: message.into(),
    }
}

fn parse_usize(line: usize, tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| malformed(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| malformed(line, format!("invalid {what}")))
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(0, |l| l.0)
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        let l = *self
            .lines
            .get(self.pos)
            .ok_or_else(|| malformed(self.last_line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<usize> {
        let (line, text) = self.next_line()?;
        let mut toks = text.split_whitespace();
        if toks.next() != Some(key) {
            return Err(malformed(line, format!("expected `{key}`")));
        }
        parse_usize(line, toks.next(), key)
    }

    fn parse(mut self) -> Result<ModelFile> {
        let (line, header) = self.next_line()?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some(MAGIC) {
            return Err(malformed(line, "missing format header"));
        }
        let version = toks
            .next()
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| malformed(line, "missing format version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let (line, kind_line) = self.next_line()?;
        let kind = match kind_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["kind", "ccp"] => ModelKind::Ccp,
            ["kind", "ncp"] => ModelKind::Ncp,
            ["kind", "ccp_conv"] => ModelKind::CcpConv,
            _ => return Err(malformed(line, "expected `kind ccp|ncp|ccp_conv`")),
        };
        let degree = self.keyed("degree")?;
        let d = self.keyed("input")?;
        let k = self.keyed("hidden")?;
        let o = self.keyed("output")?;
        if degree == 0 || d == 0 || k == 0 || o == 0 {
            return Err(malformed(line, "dimensions must be positive"));
        }

        let mut meta = BTreeMap::new();
        let mut convs: BTreeMap<usize, ConvLayerSpec> = BTreeMap::new();
        let mut arrays: BTreeMap<String, RawArray> = BTreeMap::new();
        loop {
            let (line, text) = self.next_line()?;
            let mut toks = text.split_whitespace();
            match toks.next() {
                Some("end") => break,
                Some("meta") => {
                    let key = toks.next().ok_or_else(|| malformed(line, "meta without key"))?;
                    meta.insert(key.to_string(), toks.collect::<Vec<_>>().join(" "));
                }
                Some("conv") => {
                    let mut nums = Vec::with_capacity(9);
                    for what in ["index", "in", "out", "kh", "kw", "stride", "pad", "in_h", "in_w"] {
                        nums.push(parse_usize(line, toks.next(), what)?);
                    }
                    let spec = ConvLayerSpec {
                        in_channels: nums[1],
                        out_channels: nums[2],
                        kernel_h: nums[3],
                        kernel_w: nums[4],
                        stride: nums[5],
                        padding: nums[6],
                        input_h: nums[7],
                        input_w: nums[8],
                    };
                    convs.insert(nums[0], spec);
                }
                Some("array") => {
                    let name = toks.next().ok_or_else(|| malformed(line, "array without name"))?;
                    let dims = toks
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| malformed(line, "invalid array dimension"))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let count: usize = dims.iter().product();
                    let mut values = Vec::with_capacity(count);
                    while values.len() < count {
                        let (vline, vtext) = self
                            .next_line()
                            .map_err(|_| malformed(self.last_line(), format!("array `{name}` is truncated")))?;
                        for tok in vtext.split_whitespace() {
                            let v: f64 = tok.parse().map_err(|_| {
                                malformed(vline, format!("array `{name}` is truncated or has a bad value `{tok}`"))
                            })?;
                            values.push(v);
                        }
                    }
                    if values.len() != count {
                        return Err(Error::ShapeMismatch {
                            name: name.to_string(),
                            message: format!("declared {count} values, found {}", values.len()),
                        });
                    }
                    arrays.insert(name.to_string(), RawArray { dims, values });
                }
                _ => return Err(malformed(line, format!("unexpected line `{text}`"))),
            }
        }

        let mut take = |name: &str, dims: &[usize]| -> Result<Vec<f64>> {
            let a = arrays.remove(name).ok_or_else(|| Error::ShapeMismatch {
                name: name.to_string(),
                message: "array is missing".into(),
            })?;
            if a.dims != dims {
                return Err(Error::ShapeMismatch {
                    name: name.to_string(),
                    message: format!("declared {:?}, expected {:?}", a.dims, dims),
                });
            }
            Ok(a.values)
        };
        let matrix = |v: Vec<f64>, r: usize, c: usize| Array2::from_shape_vec((r, c), v).expect("shape checked");

        let model = match kind {
            ModelKind::Ccp | ModelKind::Ncp => {
                let mut ws = Vec::with_capacity(degree);
                for n in 1..=degree {
                    ws.push(matrix(take(&format!("W{n}"), &[d, k])?, d, k));
                }
                if kind == ModelKind::Ccp {
                    let c = matrix(take("C", &[o, k])?, o, k);
                    let beta = Array1::from(take("beta", &[o])?);
                    Model::Dense(CcpNetwork::new(ws, c, beta)?.into())
                } else {
                    let mut s = Vec::new();
                    let mut b = Vec::new();
                    for n in 2..=degree {
                        s.push(matrix(take(&format!("S{n}"), &[k, k])?, k, k));
                    }
                    for n in 2..=degree {
                        b.push(Array1::from(take(&format!("b{n}"), &[k])?));
                    }
                    let c = matrix(take("C", &[o, k])?, o, k);
                    let beta = Array1::from(take("beta", &[o])?);
                    Model::Dense(NcpNetwork::new(ws, s, b, c, beta)?.into())
                }
            }
            ModelKind::CcpConv => {
                let mut layers = Vec::with_capacity(degree);
                for n in 1..=degree {
                    let spec = *convs.get(&n).ok_or_else(|| Error::ShapeMismatch {
                        name: format!("conv {n}"),
                        message: "convolution spec is missing".into(),
                    })?;
                    spec.validate()?;
                    if spec.input_len() != d || spec.output_len() != k {
                        return Err(Error::ShapeMismatch {
                            name: format!("conv {n}"),
                            message: format!(
                                "maps {} -> {}, header declares {d} -> {k}",
                                spec.input_len(),
                                spec.output_len()
                            ),
                        });
                    }
                    layers.push((spec, take(&format!("K{n}"), &[spec.kernel_len()])?));
                }
                let c = matrix(take("C", &[o, k])?, o, k);
                let beta = Array1::from(take("beta", &[o])?);
                Model::Conv(ConvCcpNetwork::new(layers, c, beta)?)
            }
        };
        if let Some(name) = arrays.keys().next() {
            return Err(Error::ShapeMismatch {
                name: name.clone(),
                message: "unexpected array for this model kind".into(),
            });
        }
        Ok(ModelFile { model, meta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    pub degree: usize,
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Ccp,
    Ncp,
}

/// Uniform `[0, 1)` draws from the top 53 bits of xoshiro256++ output.
#[derive(Debug, Clone)]
pub struct UniformStream {
    rng: Xoshiro256PlusPlus,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[−scale, scale)`.
    pub fn next_symmetric(&mut self, scale: f64) -> f64 {
        scale * (2.0 * self.next_unit() - 1.0)
    }
}

/// Random network with i.i.d. uniform weights in `[−scale, scale]`.
///
/// Draw order: `W1..WN` (row-major), then `S2..SN` and `b2..bN` for NCP,
/// then `C` and `beta`.
pub fn generate_random_network(kind: NetworkKind, dims: NetworkDims, seed: u64, scale: f64) -> Result<Network> {
    if dims.degree == 0 || dims.input == 0 || dims.hidden == 0 || dims.output == 0 {
        return Err(Error::InvalidArgument("all network dimensions must be positive".into()));
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument("scale must be finite and >= 0".into()));
    }
    let mut stream = UniformStream::new(seed);
    let mut draw = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || stream.next_symmetric(scale));
    let NetworkDims {
        degree,
        input: d,
        hidden: k,
        output: o,
    } = dims;
    let ws: Vec<_> = (0..degree).map(|_| draw(d, k)).collect();
    Ok(match kind {
        NetworkKind::Ccp => {
            let c = draw(o, k);
            let beta = draw(1, o).into_shape_with_order(o).unwrap();
            CcpNetwork::new(ws, c, beta)?.into()
        }
        NetworkKind::Ncp => {
            let s: Vec<_> = (1..degree).map(|_| draw(k, k)).collect();
            let b: Vec<_> = (1..degree)
                .map(|_| draw(1, k).into_shape_with_order(k).unwrap())
                .collect();
            let c = draw(o, k);
            let beta = draw(1, o).into_shape_with_order(o).unwrap();
            NcpNetwork::new(ws, s, b, c, beta)?.into()
        }
    })
}
