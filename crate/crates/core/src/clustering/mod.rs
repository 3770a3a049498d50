//! k-means over cell day profiles, elbow-based cluster-count selection and
//! the multi-level clustering (MLC) estimator.

mod elbow;
mod kmeans;
mod mlc;

pub use elbow::{elbow_select_g, knee_index, ElbowCurve, ELBOW_RESTARTS};
pub use kmeans::{kmeans, kmeans_best_of, nearest_centroid, sse, squared_distance, ClusterModel, KMeansOptions};
pub use mlc::{mlc_estimate, mlc_estimate_profiles, Bootstrap, ClusterCount, MlcConfig, MlcLayer, MlcOutcome};
