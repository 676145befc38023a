//! Evaluation: sparseness of learned bases, clustering accuracy under an
//! optimal label mapping, mutual information / NMI, and the k-means and k-NN
//! drivers used to turn features into labels.

mod kmeans;
mod knn;
mod metrics;

pub use kmeans::{kmeans, lloyd, KMeansResult, DEFAULT_MAX_ITER};
pub use knn::{knn_classify, per_class_prefix_split, Split};
pub use metrics::{accuracy, entropy, mutual_information, nmi, sparseness};
