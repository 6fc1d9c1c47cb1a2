use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::{relu, relu_backward, Conv2d, Dense};
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::gatecam::MASK_SIZE;
use crate::raceenv::ObservationMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub convs: Vec<ConvSpec>,
    pub latent: usize,
}

impl EncoderSpec {
    /// Three-layer Atari stack on a single-channel 84x84 mask.
    pub fn atari() -> Self {
        Self {
            height: MASK_SIZE,
            width: MASK_SIZE,
            channels: 1,
            convs: vec![
                ConvSpec { filters: 32, kernel: 8, stride: 4 },
                ConvSpec { filters: 64, kernel: 4, stride: 2 },
                ConvSpec { filters: 64, kernel: 3, stride: 1 },
            ],
            latent: 256,
        }
    }

    pub fn input_len(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// Architecture of the shared encoder and the actor and critic heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub encoder: Option<EncoderSpec>,
    /// Length of the non-image actor input.
    pub actor_vector: usize,
    /// Length of the non-image critic input.
    pub critic_vector: usize,
    /// Whether the critic also reads the encoder latent.
    pub critic_latent: bool,
    pub hidden: Vec<usize>,
    pub action_dim: usize,
    pub log_std_init: f64,
}

impl NetworkSpec {
    pub fn for_mode(mode: ObservationMode) -> Self {
        let encoder = mode.uses_mask().then(EncoderSpec::atari);
        Self {
            encoder,
            actor_vector: mode.actor_vector_dim(),
            critic_vector: mode.critic_vector_dim(),
            critic_latent: mode.uses_mask(),
            hidden: vec![512, 512],
            action_dim: 4,
            log_std_init: 0.5f64.ln(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.as_ref().map_or(0, |e| e.latent)
    }

    pub fn actor_input(&self) -> usize {
        self.latent_dim() + self.actor_vector
    }

    pub fn critic_input(&self) -> usize {
        if self.critic_latent {
            self.latent_dim() + self.critic_vector
        } else {
            self.critic_vector
        }
    }

    /// First 8 bytes (little endian) of the SHA-256 of a canonical text form.
    pub fn hash(&self) -> u64 {
        let mut text = String::from("pixelrace-net/1");
        if let Some(e) = &self.encoder {
            text += &format!(";enc={}x{}x{}", e.height, e.width, e.channels);
            for c in &e.convs {
                text += &format!(";conv={}/{}/{}", c.filters, c.kernel, c.stride);
            }
            text += &format!(";latent={}", e.latent);
        }
        text += &format!(
            ";actor={};critic={};critic_latent={};hidden={:?};act={}",
            self.actor_vector, self.critic_vector, self.critic_latent, self.hidden, self.action_dim
        );
        let digest = Sha256::digest(text.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

/// One named block of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Hidden,
    PolicyOut,
    ValueOut,
}

/// Compiled network: layer shapes plus the layout of the flat parameters.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    convs: Vec<Conv2d>,
    latent: Option<Dense>,
    actor: Vec<Dense>,
    critic: Vec<Dense>,
    table: Vec<LayerEntry>,
    conv_at: Vec<usize>,
    latent_at: usize,
    actor_at: Vec<usize>,
    log_std_at: usize,
    critic_at: Vec<usize>,
    n_params: usize,
}

fn mlp(inp: usize, hidden: &[usize], out: usize) -> Vec<Dense> {
    let mut dims = vec![inp];
    dims.extend_from_slice(hidden);
    dims.push(out);
    dims.windows(2).map(|w| Dense { inp: w[0], out: w[1] }).collect()
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let bad = |r: &str| Err(Error::InvalidParam { name: "NetworkSpec", reason: r.into() });
        if spec.action_dim == 0 || spec.hidden.contains(&0) {
            return bad("layer sizes must be positive");
        }
        if spec.actor_input() == 0 || spec.critic_input() == 0 {
            return bad("actor and critic need at least one input");
        }
        let mut convs = Vec::new();
        let mut latent = None;
        if let Some(e) = &spec.encoder {
            let (mut h, mut w, mut c) = (e.height, e.width, e.channels);
            for cs in &e.convs {
                if cs.kernel == 0 || cs.stride == 0 || cs.filters == 0 || cs.kernel > h || cs.kernel > w {
                    return bad("convolution does not fit its input");
                }
                let conv = Conv2d { in_h: h, in_w: w, in_c: c, out_c: cs.filters, kernel: cs.kernel, stride: cs.stride };
                (h, w, c) = (conv.out_h(), conv.out_w(), cs.filters);
                convs.push(conv);
            }
            if e.latent == 0 {
                return bad("latent size must be positive");
            }
            latent = Some(Dense { inp: h * w * c, out: e.latent });
        }
        let actor = mlp(spec.actor_input(), &spec.hidden, spec.action_dim);
        let critic = mlp(spec.critic_input(), &spec.hidden, 1);

        let mut table = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, len: usize| {
            table.push(LayerEntry { name, offset, len });
            offset += len;
            offset - len
        };
        let conv_at = convs.iter().enumerate().map(|(i, c)| push(format!("encoder.conv{i}"), c.n_params())).collect();
        let latent_at = latent.map_or(0, |d| push("encoder.latent".into(), d.n_params()));
        let actor_at = actor.iter().enumerate().map(|(i, d)| push(format!("actor.dense{i}"), d.n_params())).collect();
        let log_std_at = push("actor.log_std".into(), spec.action_dim);
        let critic_at = critic.iter().enumerate().map(|(i, d)| push(format!("critic.dense{i}"), d.n_params())).collect();
        Ok(Self {
            spec,
            convs,
            latent,
            actor,
            critic,
            table,
            conv_at,
            latent_at,
            actor_at,
            log_std_at,
            critic_at,
            n_params: offset,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn layers(&self) -> &[LayerEntry] {
        &self.table
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.log_std_at..self.log_std_at + self.spec.action_dim
    }

    /// Range of the final actor layer (weights then biases).
    pub fn policy_out_range(&self) -> std::ops::Range<usize> {
        let last = self.actor.len() - 1;
        self.actor_at[last]..self.actor_at[last] + self.actor[last].n_params()
    }

    /// Range of the encoder parameters (empty without an encoder).
    pub fn encoder_range(&self) -> std::ops::Range<usize> {
        let end = self.latent.map_or(0, |d| self.latent_at + d.n_params());
        0..end
    }

    /// Orthogonal weights, zero biases and the configured log-std.
    pub fn init(&self, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0f32; self.n_params];
        let root2 = std::f64::consts::SQRT_2;
        for (c, &at) in self.convs.iter().zip(&self.conv_at) {
            fill_orthogonal(&mut p[at..], c.out_c, c.patch(), root2, &mut rng);
        }
        if let Some(d) = self.latent {
            fill_orthogonal(&mut p[self.latent_at..], d.out, d.inp, root2, &mut rng);
        }
        for (stack, offsets, out_kind) in
            [(&self.actor, &self.actor_at, Kind::PolicyOut), (&self.critic, &self.critic_at, Kind::ValueOut)]
        {
            for (i, (d, &at)) in stack.iter().zip(offsets).enumerate() {
                let kind = if i + 1 == stack.len() { out_kind } else { Kind::Hidden };
                let gain = match kind {
                    Kind::Hidden => root2,
                    Kind::PolicyOut => 0.01,
                    Kind::ValueOut => 1.0,
                };
                fill_orthogonal(&mut p[at..], d.out, d.inp, gain, &mut rng);
            }
        }
        p[self.log_std_range()].fill(self.spec.log_std_init as f32);
        p
    }

    fn check(&self, params_len: usize, x: &Inputs<'_, impl Scalar>) -> Result<()> {
        let shape = |what: &str, want: usize, got: usize| {
            if want == got {
                Ok(())
            } else {
                Err(Error::ShapeMismatch(format!("{what}: expected {want} values, found {got}")))
            }
        };
        shape("parameters", self.n_params, params_len)?;
        shape("actor input", x.n * self.spec.actor_vector, x.actor.len())?;
        shape("critic input", x.n * self.spec.critic_vector, x.critic.len())?;
        match (&self.spec.encoder, x.masks) {
            (Some(e), Some(m)) => shape("masks", x.n * e.input_len(), m.len()),
            (None, None) => Ok(()),
            (Some(_), None) => Err(Error::ShapeMismatch("masks required by the encoder".into())),
            (None, Some(_)) => Err(Error::ShapeMismatch("masks given to a network without encoder".into())),
        }
    }

    pub fn forward<S: Scalar>(&self, params: &[S], x: &Inputs<'_, S>) -> Result<Forward<S>> {
        self.check(params.len(), x)?;
        let n = x.n;
        let mut conv_cols = Vec::with_capacity(self.convs.len());
        let mut enc_out: Vec<Vec<S>> = Vec::new();
        if let (Some(masks), Some(lat)) = (x.masks, self.latent) {
            let mut input: &[S] = masks;
            for (c, &at) in self.convs.iter().zip(&self.conv_at) {
                let mut cols = Vec::new();
                let mut y = vec![S::zero(); n * c.out_len()];
                c.forward(&params[at..at + c.n_params()], input, n, &mut cols, &mut y);
                relu(&mut y);
                conv_cols.push(cols);
                enc_out.push(y);
                input = enc_out.last().expect("pushed");
            }
            let mut z = vec![S::zero(); n * lat.out];
            lat.forward(&params[self.latent_at..self.latent_at + lat.n_params()], input, n, &mut z);
            relu(&mut z);
            enc_out.push(z);
        }
        let latent = enc_out.last().map(Vec::as_slice);
        let actor_in = concat_rows(latent, self.spec.latent_dim(), x.actor, self.spec.actor_vector, n);
        let critic_lat = if self.spec.critic_latent { latent } else { None };
        let critic_in = concat_rows(critic_lat, self.spec.latent_dim(), x.critic, self.spec.critic_vector, n);
        let actor_out = run_mlp(&self.actor, &self.actor_at, params, &actor_in, n);
        let critic_out = run_mlp(&self.critic, &self.critic_at, params, &critic_in, n);
        Ok(Forward { n, conv_cols, enc_out, actor_in, actor_out, critic_in, critic_out })
    }

    /// Exact parameter gradient of `sum(d_mean * mean) + sum(d_value * value)
    /// + sum(d_log_std * log_std)`.
    pub fn backward<S: Scalar>(&self, params: &[S], fwd: &Forward<S>, g: &OutputGrads<'_, S>) -> Result<Vec<S>> {
        let n = fwd.n;
        let a = self.spec.action_dim;
        if g.d_mean.len() != n * a || g.d_value.len() != n || g.d_log_std.len() != a {
            return Err(Error::ShapeMismatch("output gradients do not match the batch".into()));
        }
        let mut grad = vec![S::zero(); self.n_params];
        for (d, &v) in grad[self.log_std_range()].iter_mut().zip(g.d_log_std) {
            *d = v;
        }
        let d_actor_in = back_mlp(&self.actor, &self.actor_at, params, &fwd.actor_in, &fwd.actor_out, g.d_mean, n, &mut grad);
        let d_critic_in =
            back_mlp(&self.critic, &self.critic_at, params, &fwd.critic_in, &fwd.critic_out, g.d_value, n, &mut grad);

        let Some(lat) = self.latent else { return Ok(grad) };
        let ld = lat.out;
        let mut dz = vec![S::zero(); n * ld];
        for r in 0..n {
            let row = &mut dz[r * ld..(r + 1) * ld];
            let ai = self.spec.actor_input();
            row.iter_mut().zip(&d_actor_in[r * ai..r * ai + ld]).for_each(|(d, &v)| *d += v);
            if self.spec.critic_latent {
                let ci = self.spec.critic_input();
                row.iter_mut().zip(&d_critic_in[r * ci..r * ci + ld]).for_each(|(d, &v)| *d += v);
            }
        }
        let nc = self.convs.len();
        relu_backward(&fwd.enc_out[nc], &mut dz);
        let lat_in: &[S] = if nc == 0 { &[] } else { &fwd.enc_out[nc - 1] };
        let mut dy = vec![S::zero(); n * lat.inp];
        let lp = self.latent_at..self.latent_at + lat.n_params();
        lat.backward(&params[lp.clone()], lat_in, &dz, n, &mut grad[lp], (nc > 0).then_some(&mut dy[..]));
        for i in (0..nc).rev() {
            let c = &self.convs[i];
            relu_backward(&fwd.enc_out[i], &mut dy);
            let range = self.conv_at[i]..self.conv_at[i] + c.n_params();
            let mut dx = if i > 0 { vec![S::zero(); n * c.in_len()] } else { Vec::new() };
            c.backward(&params[range.clone()], &fwd.conv_cols[i], &dy, n, &mut grad[range], (i > 0).then_some(&mut dx[..]));
            dy = dx;
        }
        Ok(grad)
    }
}

/// Batch inputs, row-major per sample.
#[derive(Clone, Copy, Debug)]
pub struct Inputs<'a, S> {
    pub n: usize,
    /// Flattened masks, `n * height * width * channels` values.
    pub masks: Option<&'a [S]>,
    pub actor: &'a [S],
    pub critic: &'a [S],
}

/// Loss gradients at the network outputs.
#[derive(Clone, Copy, Debug)]
pub struct OutputGrads<'a, S> {
    pub d_mean: &'a [S],
    pub d_value: &'a [S],
    pub d_log_std: &'a [S],
}

/// Outputs and cached intermediates of a forward pass.
#[derive(Clone, Debug)]
pub struct Forward<S> {
    n: usize,
    conv_cols: Vec<Vec<S>>,
    enc_out: Vec<Vec<S>>,
    actor_in: Vec<S>,
    actor_out: Vec<Vec<S>>,
    critic_in: Vec<S>,
    critic_out: Vec<Vec<S>>,
}

impl<S> Forward<S> {
    pub fn batch(&self) -> usize {
        self.n
    }

    /// Action means, `n * action_dim`.
    pub fn mean(&self) -> &[S] {
        self.actor_out.last().expect("actor has layers")
    }

    pub fn value(&self) -> &[S] {
        self.critic_out.last().expect("critic has layers")
    }

    pub fn latent(&self) -> Option<&[S]> {
        self.enc_out.last().map(Vec::as_slice)
    }
}

fn concat_rows<S: Scalar>(left: Option<&[S]>, lw: usize, right: &[S], rw: usize, n: usize) -> Vec<S> {
    let Some(left) = left else { return right.to_vec() };
    let mut out = Vec::with_capacity(n * (lw + rw));
    for r in 0..n {
        out.extend_from_slice(&left[r * lw..(r + 1) * lw]);
        out.extend_from_slice(&right[r * rw..(r + 1) * rw]);
    }
    out
}

fn run_mlp<S: Scalar>(layers: &[Dense], at: &[usize], params: &[S], input: &[S], n: usize) -> Vec<Vec<S>> {
    let mut outs: Vec<Vec<S>> = Vec::with_capacity(layers.len());
    for (i, (d, &o)) in layers.iter().zip(at).enumerate() {
        let x: &[S] = if i == 0 { input } else { &outs[i - 1] };
        let mut y = vec![S::zero(); n * d.out];
        d.forward(&params[o..o + d.n_params()], x, n, &mut y);
        if i + 1 < layers.len() {
            relu(&mut y);
        }
        outs.push(y);
    }
    outs
}

#[allow(clippy::too_many_arguments)]
fn back_mlp<S: Scalar>(
    layers: &[Dense],
    at: &[usize],
    params: &[S],
    input: &[S],
    outs: &[Vec<S>],
    d_out: &[S],
    n: usize,
    grad: &mut [S],
) -> Vec<S> {
    let mut dy = d_out.to_vec();
    for i in (0..layers.len()).rev() {
        let d = &layers[i];
        if i + 1 < layers.len() {
            relu_backward(&outs[i], &mut dy);
        }
        let x: &[S] = if i == 0 { input } else { &outs[i - 1] };
        let mut dx = vec![S::zero(); n * d.inp];
        let r = at[i]..at[i] + d.n_params();
        d.backward(&params[r.clone()], x, &dy, n, &mut grad[r], Some(&mut dx));
        dy = dx;
    }
    dy
}

/// Writes a `rows x cols` row-major orthogonal matrix scaled by `gain`.
fn fill_orthogonal(out: &mut [f32], rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) {
    let (big, small) = (rows.max(cols), rows.min(cols));
    let g = DMatrix::<f64>::from_fn(big, small, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..small {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let m = if rows >= cols { q } else { q.transpose() };
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = (gain * m[(i, j)]) as f32;
        }
    }
}
