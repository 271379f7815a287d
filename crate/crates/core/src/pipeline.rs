//! Scene-level orchestration: detect, assess, build the interaction graph, run
//! the network, refine, reason.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::detector::DetectorPort;
use crate::error::{Error, Result};
use crate::interaction::{
    build_graph, forward_mc, params_io, refine, scaled_features, BgnnParams, GraphTensor, InteractionGraph,
    McPrediction, RefinedEstimate, FEATURE_DIM,
};
use crate::reasoner::{reason, DecisionTrace, ReasoningInput};
use crate::scene::{PointCloud, Scene, TrackedObject};
use crate::uncertainty::{assess, ObjectAssessment};

/// Everything computed for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnalysis {
    pub objects: Vec<TrackedObject>,
    pub assessments: Vec<ObjectAssessment>,
    pub graph: InteractionGraph,
    pub refined: Vec<RefinedEstimate>,
    pub trace: DecisionTrace,
}

pub struct Pipeline {
    config: PipelineConfig,
    params: BgnnParams,
    detector: Box<dyn DetectorPort + Send + Sync>,
}

impl Pipeline {
    /// Validates the config and loads (or initializes) the network.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let params = match &config.bgnn_params {
            Some(path) => {
                let (params, saved) = params_io::read_params(path)?;
                if saved.layers != config.interaction.layers || saved.embed_dim != config.interaction.embed_dim {
                    return Err(Error::Config(format!(
                        "{} was trained with {} layers x {}, config asks for {} x {}",
                        path.display(),
                        saved.layers,
                        saved.embed_dim,
                        config.interaction.layers,
                        config.interaction.embed_dim
                    )));
                }
                params
            }
            None => BgnnParams::init(FEATURE_DIM, &config.interaction, config.seed),
        };
        params.validate()?;
        if params.input_dim() != FEATURE_DIM {
            return Err(Error::Config(format!(
                "network expects {} input features, scenes provide {FEATURE_DIM}",
                params.input_dim()
            )));
        }
        let detector = config.detector.build();
        Ok(Pipeline {
            config,
            params,
            detector,
        })
    }

    pub fn with_params(config: PipelineConfig, params: BgnnParams) -> Result<Self> {
        let mut p = Self::new(PipelineConfig {
            bgnn_params: None,
            ..config
        })?;
        params.validate()?;
        p.params = params;
        Ok(p)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn params(&self) -> &BgnnParams {
        &self.params
    }

    /// Drops returns beyond the normalization range.
    ///
    /// Objects already attached to the scene keep their support indices only
    /// when nothing was dropped.
    pub fn prepare(&self, scene: &Scene) -> Result<Scene> {
        let r_max = self.config.normalization.max_range;
        if scene.cloud.points.iter().all(|p| p.range() <= r_max) {
            return Ok(scene.clone());
        }
        let points = scene.cloud.points.iter().copied().filter(|p| p.range() <= r_max).collect();
        let objects = scene
            .objects
            .iter()
            .map(|o| TrackedObject {
                support_points: Vec::new(),
                ..o.clone()
            })
            .collect();
        Scene::new(
            scene.timestamp,
            scene.ego,
            PointCloud::new(scene.cloud.frame_id.clone(), points),
            objects,
            scene.ground_truth.clone(),
        )
    }

    /// The scene with its objects replaced by detections.
    pub fn detect(&self, scene: &Scene) -> Result<Scene> {
        let mut s = self.prepare(scene)?;
        s.objects = self.detector.detect(&s)?;
        s.validate()?;
        Ok(s)
    }

    pub fn assess(&self, scene: &Scene) -> Vec<ObjectAssessment> {
        assess(
            &scene.objects,
            &scene.cloud,
            &scene.ego,
            &self.config.uncertainty,
            &self.config.risk,
        )
    }

    pub fn graph(&self, scene: &Scene) -> InteractionGraph {
        build_graph(&scene.objects, &scene.ego, &self.config.interaction)
    }

    pub fn predict(&self, scene: &Scene, assessments: &[ObjectAssessment], graph: &InteractionGraph) -> Result<McPrediction> {
        let features = scaled_features(&scene.objects, assessments, &scene.ego)?;
        let tensor = GraphTensor::new(graph, features)?;
        forward_mc(&tensor, &self.params, self.config.interaction.mc_samples, self.config.seed)
    }

    /// Assessment onward, on the objects already in `scene`.
    pub fn analyze(&self, scene: &Scene) -> Result<SceneAnalysis> {
        let assessments = self.assess(scene);
        let graph = self.graph(scene);
        let prediction = self.predict(scene, &assessments, &graph)?;
        let refined = refine(&scene.objects, &assessments, &graph, &prediction, &self.config.uncertainty)?;
        let input = ReasoningInput {
            ego: &scene.ego,
            cloud: &scene.cloud,
            objects: &scene.objects,
            assessments: &assessments,
            refined: &refined,
            graph: &graph,
        };
        let trace = reason(&input, &self.config.reasoner, &self.config.uncertainty);
        Ok(SceneAnalysis {
            objects: scene.objects.clone(),
            assessments,
            graph,
            refined,
            trace,
        })
    }

    /// Detection followed by [`Pipeline::analyze`].
    pub fn run(&self, scene: &Scene) -> Result<(Scene, SceneAnalysis)> {
        let detected = self.detect(scene)?;
        let analysis = self.analyze(&detected)?;
        Ok((detected, analysis))
    }
}
