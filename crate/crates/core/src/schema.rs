//! Versioned JSON documents: exported posteriors and checkpoints.

use serde::{Deserialize, Serialize};

use crate::amortize::{AmortizationConfig, FlowFamily, Hypernetwork, Posterior};
use crate::diffcore::{unflatten, Params};
use crate::error::{Error, Result};
use crate::flows::{
    Activation, Flow, FlowStack, MadeParams, OrthogonalFactor, PermutationOrder, PlanarParams,
    SylvesterParams,
};
use crate::linalg::{HouseholderChain, Matrix, OrthonormalColumns, UpperTriangular};
use crate::vi::{DiagGaussian, VaeConfig, VaeModel};

pub const PARAMS_SCHEMA: &str = "snf-params/1";
pub const CHECKPOINT_SCHEMA: &str = "snf-checkpoint/1";

/// Tolerance used when re-validating imported orthonormal columns.
const IMPORT_ORTHO_TOL: f64 = 1e-6;

/// A posterior with constrained flow parameters, as plain arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub schema: String,
    pub variant: FlowFamily,
    pub activation: Activation,
    pub base: BaseRecord,
    pub flows: Vec<FlowRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseRecord {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QRecord {
    Columns(Vec<Vec<f64>>),
    Householder {
        householder: Vec<Vec<f64>>,
    },
    Permutation {
        permutation: PermutationOrder,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowRecord {
    Planar {
        u: Vec<f64>,
        w: Vec<f64>,
        b: f64,
    },
    Sylvester {
        q: QRecord,
        r: Vec<Vec<f64>>,
        r_tilde: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Iaf {
        /// Dense (masked) weights and biases in layer order input, hidden, μ, s.
        layers: Vec<LayerRecord>,
        context: Vec<f64>,
    },
    Reverse {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Config("ragged matrix rows".into()));
    }
    Ok(Matrix::from_rows(rows))
}

impl ParamsFile {
    pub fn from_posterior(variant: FlowFamily, post: &Posterior) -> Result<Self> {
        let flows = post
            .flows
            .flows()
            .iter()
            .map(|f| {
                Ok(match f {
                    Flow::Planar(p) => FlowRecord::Planar {
                        u: p.u().to_vec(),
                        w: p.w().to_vec(),
                        b: p.b(),
                    },
                    Flow::Sylvester(p) => FlowRecord::Sylvester {
                        q: match p.q() {
                            OrthogonalFactor::Columns(q) => QRecord::Columns(rows(q.matrix())),
                            OrthogonalFactor::Householder(h) => QRecord::Householder {
                                householder: h.vectors().to_vec(),
                            },
                            OrthogonalFactor::Permutation { dim, order } => QRecord::Permutation {
                                permutation: *order,
                                dim: *dim,
                            },
                        },
                        r: rows(p.r().as_matrix()),
                        r_tilde: rows(p.r_tilde().as_matrix()),
                        b: p.bias().to_vec(),
                    },
                    Flow::Iaf { made, context } => FlowRecord::Iaf {
                        layers: made
                            .layers()
                            .iter()
                            .map(|l| LayerRecord {
                                weight: rows(l.weight()),
                                bias: l.bias().to_vec(),
                            })
                            .collect(),
                        context: context.clone(),
                    },
                    Flow::Reverse { dim } => FlowRecord::Reverse { dim: *dim },
                    Flow::GeneralSylvester(_) => {
                        return Err(Error::Config(
                            "general Sylvester flows have no exported form".into(),
                        ))
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamsFile {
            schema: PARAMS_SCHEMA.into(),
            variant,
            activation: post.flows.activation(),
            base: BaseRecord {
                mu: post.base.mu().to_vec(),
                log_sigma: post.base.log_sigma().to_vec(),
            },
            flows,
        })
    }

    /// Rebuilds the posterior, re-checking every invariant.
    pub fn to_posterior(&self) -> Result<Posterior> {
        check_schema(&self.schema, PARAMS_SCHEMA)?;
        let base = DiagGaussian::new(self.base.mu.clone(), self.base.log_sigma.clone())?;
        let act = self.activation;
        let mut flows = Vec::with_capacity(self.flows.len());
        for rec in &self.flows {
            flows.push(match rec {
                FlowRecord::Planar { u, w, b } => {
                    Flow::Planar(PlanarParams::new(u.clone(), w.clone(), *b)?)
                }
                FlowRecord::Sylvester { q, r, r_tilde, b } => {
                    let q = match q {
                        QRecord::Columns(c) => OrthogonalFactor::Columns(OrthonormalColumns::new(
                            matrix(c)?,
                            IMPORT_ORTHO_TOL,
                        )?),
                        QRecord::Householder { householder } => {
                            let dim = householder.first().map_or(0, Vec::len);
                            OrthogonalFactor::Householder(HouseholderChain::new(
                                dim,
                                householder.clone(),
                            )?)
                        }
                        QRecord::Permutation { permutation, dim } => {
                            OrthogonalFactor::Permutation {
                                dim: *dim,
                                order: *permutation,
                            }
                        }
                    };
                    Flow::Sylvester(SylvesterParams::new(
                        q,
                        UpperTriangular::new(matrix(r)?)?,
                        UpperTriangular::new(matrix(r_tilde)?)?,
                        b.clone(),
                        act,
                    )?)
                }
                FlowRecord::Iaf { layers, context } => {
                    let [l_in, l_hid, l_mu, l_s] = layers.as_slice() else {
                        return Err(Error::Config(
                            "an IAF flow needs exactly four layers".into(),
                        ));
                    };
                    let w_in = matrix(&l_in.weight)?;
                    let (c, d) = (w_in.rows(), w_in.cols());
                    let made = MadeParams::with_weights(
                        d,
                        c,
                        w_in,
                        l_in.bias.clone(),
                        matrix(&l_hid.weight)?,
                        l_hid.bias.clone(),
                        matrix(&l_mu.weight)?,
                        l_mu.bias.clone(),
                        matrix(&l_s.weight)?,
                        l_s.bias.clone(),
                    )?;
                    Flow::Iaf {
                        made,
                        context: context.clone(),
                    }
                }
                FlowRecord::Reverse { dim } => Flow::Reverse { dim: *dim },
            });
        }
        let flows = FlowStack::new(base.dim(), flows, act)?;
        Ok(Posterior { base, flows })
    }
}

fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Config(format!(
            "unsupported schema {found:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

/// One named parameter block of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub name: String,
    pub values: Vec<f64>,
}

/// Every trainable parameter of a model, addressed by block name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema: String,
    pub amortization: AmortizationConfig,
    /// Present for VAE checkpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vae: Option<VaeConfig>,
    pub blocks: Vec<Block>,
}

fn blocks<P: Params<f64>>(model: &P) -> Vec<Block> {
    let mut out = Vec::new();
    model.visit("", &mut |name, values| {
        out.push(Block {
            name: name.to_string(),
            values: values.to_vec(),
        })
    });
    out
}

/// Fills `skeleton` from `blocks`, which must match its layout exactly.
fn restore<P: Params<f64>>(skeleton: &P, blocks: &[Block]) -> Result<P::With<f64>> {
    let layout = skeleton.layout();
    if layout.len() != blocks.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} blocks, model expects {}",
            blocks.len(),
            layout.len()
        )));
    }
    let mut flat = Vec::with_capacity(skeleton.num_params());
    for ((name, len), block) in layout.iter().zip(blocks) {
        if *name != block.name || *len != block.values.len() {
            return Err(Error::Config(format!(
                "checkpoint block {:?} ({} values) does not match {name:?} ({len} values)",
                block.name,
                block.values.len()
            )));
        }
        flat.extend_from_slice(&block.values);
    }
    Ok(unflatten(skeleton, &flat))
}

impl Checkpoint {
    pub fn from_hypernetwork(h: &Hypernetwork) -> Self {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            amortization: *h.config(),
            vae: None,
            blocks: blocks(h),
        }
    }

    pub fn from_vae(model: &VaeModel, vae: VaeConfig) -> Self {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            amortization: *model.hypernetwork().config(),
            vae: Some(vae),
            blocks: blocks(model),
        }
    }

    pub fn to_hypernetwork(&self) -> Result<Hypernetwork> {
        check_schema(&self.schema, CHECKPOINT_SCHEMA)?;
        restore(&Hypernetwork::zeros(self.amortization)?, &self.blocks)
    }

    pub fn to_vae(&self) -> Result<VaeModel> {
        check_schema(&self.schema, CHECKPOINT_SCHEMA)?;
        let vae = self
            .vae
            .ok_or_else(|| Error::Config("checkpoint holds no VAE".into()))?;
        let skeleton = VaeModel::new(&vae, self.amortization, &mut crate::seeded_rng(0))?;
        restore(&skeleton, &self.blocks)
    }
}
