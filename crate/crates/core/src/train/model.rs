use crate::autodiff::{Activation, Matrix, Tape, Tensor};
use crate::graph_io::{GraphInstance, SeededRng};
use crate::layers::{
    global_mean_readout, normalize_adjacency, Bound, GcnLayer, MlpBlock, ParamStore,
};
use crate::pooling::{AuxLoss, DiffPool, PoolOutput, PoolingKind, SagPool, SpaPool, TopKPool};

use super::{ModelConfig, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub enum PoolLayer {
    SpaPool(SpaPool),
    TopK(TopKPool),
    SagPool(SagPool),
    DiffPool(DiffPool),
}

/// `MLP(F→h) → GCN(h→h) → pool → GCN(h→h) → mean readout → MLP(h→classes)`.
///
/// The input block is followed by a ReLU; both GCNs use ReLU; the classifier
/// block emits raw logits.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub num_classes: usize,
    pub params: ParamStore,
    pub encoder: MlpBlock,
    pub gcn_in: GcnLayer,
    pub pool: PoolLayer,
    pub gcn_out: GcnLayer,
    pub classifier: MlpBlock,
}

/// Initialises every parameter from one stream seeded with `seed`, in
/// layer order.
pub fn build_model(
    input_dim: usize,
    num_classes: usize,
    config: &ModelConfig,
    seed: u64,
) -> Result<Model, TrainError> {
    config.validate()?;
    if input_dim == 0 || num_classes < 2 {
        return Err(TrainError::Config(format!(
            "need at least one feature and two classes, got {input_dim} and {num_classes}"
        )));
    }
    let h = config.hidden;
    let mut rng = SeededRng::new(seed);
    let mut params = ParamStore::new();
    let encoder = MlpBlock::init(&mut params, "encoder", &[input_dim, h], &mut rng);
    let gcn_in = GcnLayer::init(&mut params, "gcn_in", h, h, Activation::Relu, &mut rng);
    let pool = match config.pooling {
        PoolingKind::SpaPool => PoolLayer::SpaPool(SpaPool::init(
            &mut params,
            "pool",
            h,
            config.ratio,
            config.effective_selector().expect("spapool selector"),
            config.effective_aggregator().expect("spapool aggregator"),
            config.effective_aux_loss(),
            &mut rng,
        )),
        PoolingKind::TopK => PoolLayer::TopK(TopKPool::init(
            &mut params,
            "pool",
            h,
            config.ratio,
            &mut rng,
        )),
        PoolingKind::SagPool => PoolLayer::SagPool(SagPool::init(
            &mut params,
            "pool",
            h,
            config.ratio,
            &mut rng,
        )),
        PoolingKind::DiffPool => {
            let clusters = config
                .clusters
                .ok_or_else(|| TrainError::Config("diffpool needs a cluster count".into()))?;
            PoolLayer::DiffPool(DiffPool::init(&mut params, "pool", h, clusters, &mut rng))
        }
    };
    let gcn_out = GcnLayer::init(&mut params, "gcn_out", h, h, Activation::Relu, &mut rng);
    let classifier = MlpBlock::init(&mut params, "classifier", &[h, num_classes], &mut rng);
    Ok(Model {
        config: config.clone(),
        input_dim,
        num_classes,
        params,
        encoder,
        gcn_in,
        pool,
        gcn_out,
        classifier,
    })
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct GraphOutput {
    /// 1×classes.
    pub logits: Tensor,
    pub pooled: PoolOutput,
}

impl GraphOutput {
    pub fn aux(&self) -> Option<&AuxLoss> {
        self.pooled.aux.as_ref()
    }
}

impl Model {
    /// Records the forward pass of `graph` on `tape` using bound parameters.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        graph: &GraphInstance,
    ) -> Result<GraphOutput, TrainError> {
        if graph.feature_dim() != self.input_dim {
            return Err(TrainError::Config(format!(
                "graph has {} features, model expects {}",
                graph.feature_dim(),
                self.input_dim
            )));
        }
        let a = tape.constant(graph.adjacency().clone());
        let a_norm = tape.constant(normalize_adjacency(graph.adjacency()));
        let x = tape.constant(graph.features().clone());

        let h = self.encoder.forward(tape, params, x)?;
        let h = tape.relu(h);
        let h = self.gcn_in.forward(tape, params, a_norm, h)?;
        let pooled = match &self.pool {
            PoolLayer::SpaPool(p) => p.forward(tape, params, a, a_norm, h)?,
            PoolLayer::TopK(p) => p.forward(tape, params, a, h)?,
            PoolLayer::SagPool(p) => p.forward(tape, params, a, a_norm, h)?,
            PoolLayer::DiffPool(p) => p.forward(tape, params, a, a_norm, h)?,
        };
        let a2_norm = tape.normalize_adjacency(pooled.adjacency)?;
        let h = self
            .gcn_out
            .forward(tape, params, a2_norm, pooled.features)?;
        let r = global_mean_readout(tape, h)?;
        let logits = self.classifier.forward(tape, params, r)?;
        Ok(GraphOutput { logits, pooled })
    }
}

/// Logits and auxiliary loss values of `graph` on a private tape.
pub fn forward_graph(
    model: &Model,
    graph: &GraphInstance,
) -> Result<(Matrix, Option<crate::pooling::AuxLossReport>), TrainError> {
    let mut tape = Tape::new();
    let params = model.params.bind(&mut tape);
    let out = model.forward(&mut tape, &params, graph)?;
    let aux = out.aux().map(|a| a.report(&tape));
    Ok((tape.value(out.logits).clone(), aux))
}
