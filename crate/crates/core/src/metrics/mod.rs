//! Similarity, association, distance and utility measurements between a
//! real and a synthetic table.

mod association;
mod distance;
mod similarity;
mod utility;

pub use association::{
    association_matrix, correlation_ratio, diff_corr, frobenius_diff, pearson, theils_u, AssociationMatrix,
};
pub use distance::{dcr_nndr, embed, nearest_stats, percentile, sq_dist, DistancePair, PrivacyDistanceReport};
pub use similarity::{category_counts, jsd, similarity_report, wasserstein_1d, ColumnSimilarity, SimilarityReport};
pub use utility::{ml_utility, ModelUtility, Scores, UtilityReport};
