//! Encoder–decoder generator with skip connections, a pyramid-pooling stage
//! after the third encoder layer, squeeze-excitation at the bottleneck, and a
//! factorized residual block on every layer.

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::kernels::Conv2dOptions;
use crate::nn::layers::{BatchNorm2d, Conv2d, ConvTranspose2d, Ctx, Init};
use crate::nn::se::SE_REDUCTION;
use crate::nn::{FactorizedBlock, PyramidPooling, SqueezeExcite};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Activation, Mode, Rng, Tape, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DECODER_DROPOUT: f64 = 0.5;
/// Dilation of the factorized block on encoder layers C1..C8.
pub const ENCODER_DILATIONS: [usize; 8] = [2, 2, 4, 4, 8, 8, 16, 16];
const ENCODER_MULTIPLIERS: [usize; 8] = [1, 2, 4, 8, 8, 8, 8, 8];
/// Decoder layers D1..D3 carry batchnorm and dropout.
const DECODER_REGULARIZED: usize = 3;
/// Pyramid pooling sits between C3 and C4.
const SPP_AFTER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub base_channels: usize,
    /// Number of encoder (and decoder) layers; the input is `2^depth` square.
    pub depth: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            base_channels: 64,
            depth: 8,
        }
    }
}

/// One row of the layer table derived from a [`GeneratorConfig`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub out_size: usize,
    pub dilation: Option<usize>,
}

impl GeneratorConfig {
    pub fn with_base(base_channels: usize) -> Self {
        GeneratorConfig {
            base_channels,
            depth: 8,
        }
    }

    /// Six-layer variant on 64×64 inputs for fast tests.
    pub fn tiny(base_channels: usize) -> Self {
        GeneratorConfig {
            base_channels,
            depth: 6,
        }
    }

    pub fn input_size(&self) -> usize {
        1 << self.depth
    }

    pub fn validate(&self) -> Result<()> {
        if !(4..=8).contains(&self.depth) {
            return Err(Error::param(format!("generator depth {} outside 4..=8", self.depth)));
        }
        if self.base_channels == 0 {
            return Err(Error::param("base_channels must be positive"));
        }
        Ok(())
    }

    pub fn encoder_widths(&self) -> Vec<usize> {
        ENCODER_MULTIPLIERS[..self.depth]
            .iter()
            .map(|m| m * self.base_channels)
            .collect()
    }

    pub fn encoder_dilations(&self) -> Vec<usize> {
        ENCODER_DILATIONS[..self.depth].to_vec()
    }

    /// Output widths of D1..D_depth; the last is the single mask channel.
    pub fn decoder_widths(&self) -> Vec<usize> {
        let enc = self.encoder_widths();
        (1..=self.depth)
            .map(|k| if k < self.depth { enc[self.depth - 1 - k] } else { 1 })
            .collect()
    }

    /// Mirror of the encoder schedule.
    pub fn decoder_dilations(&self) -> Vec<usize> {
        let mut d = self.encoder_dilations();
        d.reverse();
        d
    }

    /// Input width of D_k (1-based): the previous decoder output plus its
    /// skip partner C_{depth+1-k}.
    pub fn decoder_input_width(&self, k: usize) -> usize {
        let enc = self.encoder_widths();
        if k == 1 {
            enc[self.depth - 1]
        } else {
            self.decoder_widths()[k - 2] + enc[self.depth - k]
        }
    }

    pub fn layer_table(&self) -> Vec<LayerSpec> {
        let enc = self.encoder_widths();
        let dec = self.decoder_widths();
        let size = self.input_size();
        let mut rows = Vec::new();
        for (i, &w) in enc.iter().enumerate() {
            rows.push(LayerSpec {
                name: format!("C{}", i + 1),
                in_channels: if i == 0 { 1 } else { enc[i - 1] },
                out_channels: w,
                out_size: size >> (i + 1),
                dilation: Some(self.encoder_dilations()[i]),
            });
        }
        for (i, &w) in dec.iter().enumerate() {
            let k = i + 1;
            rows.push(LayerSpec {
                name: format!("D{k}"),
                in_channels: self.decoder_input_width(k),
                out_channels: w,
                out_size: 1 << k,
                dilation: (k < self.depth).then(|| self.decoder_dilations()[i]),
            });
        }
        rows
    }
}

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub conv: Conv2d,
    pub bn: Option<BatchNorm2d>,
    pub activation: Activation,
    pub block: FactorizedBlock,
}

#[derive(Clone, Debug)]
pub struct DecoderLayer {
    pub deconv: ConvTranspose2d,
    pub bn: Option<BatchNorm2d>,
    pub dropout: f64,
    /// `None` on the output layer, which ends in tanh instead.
    pub block: Option<FactorizedBlock>,
}

/// Generator weights and layer wiring.
#[derive(Clone, Debug)]
pub struct GeneratorParams<S: Scalar = f32> {
    pub config: GeneratorConfig,
    pub encoder: Vec<EncoderLayer>,
    pub spp: PyramidPooling,
    pub se: SqueezeExcite,
    pub decoder: Vec<DecoderLayer>,
    pub store: ParamStore<S>,
}

/// Activation shapes observed during one forward pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GeneratorTrace {
    pub encoder: Vec<Vec<usize>>,
    pub decoder: Vec<Vec<usize>>,
}

impl<S: Scalar> GeneratorParams<S> {
    pub fn init(config: GeneratorConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut init = Init::new(&mut store, rng);
        let enc_w = config.encoder_widths();
        let enc_d = config.encoder_dilations();
        let mut encoder = Vec::with_capacity(config.depth);
        for (i, &w) in enc_w.iter().enumerate() {
            let name = format!("gen.enc{}", i + 1);
            let cin = if i == 0 { 1 } else { enc_w[i - 1] };
            let conv = Conv2d::new(&mut init, &format!("{name}.conv"), cin, w, (4, 4), Conv2dOptions::new(2, 1, 1))?;
            let bn = if i > 0 {
                Some(BatchNorm2d::new(&mut init, &format!("{name}.bn"), w)?)
            } else {
                None
            };
            let activation = if i + 1 == config.depth {
                Activation::Relu
            } else {
                Activation::LeakyRelu(LEAKY_SLOPE)
            };
            let block = FactorizedBlock::new(&mut init, &format!("{name}.fact"), w, enc_d[i])?;
            encoder.push(EncoderLayer {
                conv,
                bn,
                activation,
                block,
            });
        }
        let spp = PyramidPooling::new(&mut init, "gen.spp", enc_w[SPP_AFTER - 1])?;
        let se = SqueezeExcite::new(&mut init, "gen.se", enc_w[config.depth - 1], SE_REDUCTION)?;
        let dec_w = config.decoder_widths();
        let dec_d = config.decoder_dilations();
        let mut decoder = Vec::with_capacity(config.depth);
        for (i, &w) in dec_w.iter().enumerate() {
            let k = i + 1;
            let name = format!("gen.dec{k}");
            let last = k == config.depth;
            let deconv = ConvTranspose2d::new(
                &mut init,
                &format!("{name}.deconv"),
                config.decoder_input_width(k),
                w,
                4,
                2,
                1,
            )?;
            let regularized = k <= DECODER_REGULARIZED && !last;
            let bn = if regularized {
                Some(BatchNorm2d::new(&mut init, &format!("{name}.bn"), w)?)
            } else {
                None
            };
            let block = if last {
                None
            } else {
                Some(FactorizedBlock::new(&mut init, &format!("{name}.fact"), w, dec_d[i])?)
            };
            decoder.push(DecoderLayer {
                deconv,
                bn,
                dropout: if regularized { DECODER_DROPOUT } else { 0.0 },
                block,
            });
        }
        let params = GeneratorParams {
            config,
            encoder,
            spp,
            se,
            decoder,
            store,
        };
        params.check_wiring()?;
        Ok(params)
    }

    /// Deterministic initialization from a seed.
    pub fn seeded(config: GeneratorConfig, seed: u64) -> Result<Self> {
        Self::init(config, &mut Rng::seed_from_u64(seed))
    }

    /// Every decoder layer's input width must equal its predecessor's output
    /// plus the matching encoder skip.
    pub fn check_wiring(&self) -> Result<()> {
        let enc = self.config.encoder_widths();
        let depth = self.config.depth;
        for (i, layer) in self.decoder.iter().enumerate() {
            let expected = if i == 0 {
                enc[depth - 1]
            } else {
                self.decoder[i - 1].deconv.out_channels + self.encoder[depth - 1 - i].conv.out_channels
            };
            if layer.deconv.in_channels != expected {
                return Err(Error::dim(format!(
                    "D{} takes {} channels but its inputs provide {expected}",
                    i + 1,
                    layer.deconv.in_channels
                )));
            }
        }
        Ok(())
    }

    /// Map `x[N,1,S,S]` in `[-1,1]` to a mask in `[-1,1]` of the same shape.
    pub fn forward(&mut self, tape: &mut Tape<S>, x: Var, mode: Mode, rng: &mut Rng) -> Result<Var> {
        self.forward_traced(tape, x, mode, rng, None)
    }

    pub fn forward_traced(
        &mut self,
        tape: &mut Tape<S>,
        x: Var,
        mode: Mode,
        rng: &mut Rng,
        mut trace: Option<&mut GeneratorTrace>,
    ) -> Result<Var> {
        let size = self.config.input_size();
        let (_, c, h, w) = tape.value(x).dims4()?;
        if (c, h, w) != (1, size, size) {
            return Err(Error::dim(format!(
                "generator expects [N,1,{size},{size}] input, got {:?}",
                tape.shape(x)
            )));
        }
        let GeneratorParams {
            encoder,
            spp,
            se,
            decoder,
            store,
            ..
        } = self;
        let mut ctx = Ctx::new(tape, store, mode, rng);
        let mut skips = Vec::with_capacity(encoder.len());
        let mut h = x;
        for (i, layer) in encoder.iter().enumerate() {
            h = layer.conv.forward(&mut ctx, h)?;
            if let Some(bn) = &layer.bn {
                h = bn.forward(&mut ctx, h)?;
            }
            h = ctx.tape.activation(h, layer.activation)?;
            h = layer.block.forward(&mut ctx, h)?;
            if let Some(t) = trace.as_deref_mut() {
                t.encoder.push(ctx.tape.shape(h).to_vec());
            }
            skips.push(h);
            if i + 1 == SPP_AFTER {
                h = spp.forward(&mut ctx, h)?;
            }
        }
        h = se.forward(&mut ctx, h)?;
        let depth = encoder.len();
        for (i, layer) in decoder.iter().enumerate() {
            if i > 0 {
                h = ctx.tape.concat_channels(h, skips[depth - 1 - i])?;
            }
            h = layer.deconv.forward(&mut ctx, h)?;
            if let Some(bn) = &layer.bn {
                h = bn.forward(&mut ctx, h)?;
            }
            h = ctx.tape.dropout(h, layer.dropout, ctx.mode, ctx.rng)?;
            h = match &layer.block {
                Some(block) => {
                    let r = ctx.tape.relu(h)?;
                    block.forward(&mut ctx, r)?
                }
                None => ctx.tape.activation(h, Activation::Tanh)?,
            };
            if let Some(t) = trace.as_deref_mut() {
                t.decoder.push(ctx.tape.shape(h).to_vec());
            }
        }
        Ok(h)
    }
}
