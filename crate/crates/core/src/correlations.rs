//! Correlations (placeholder during bring-up).
