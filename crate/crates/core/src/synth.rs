//! Synthesis (placeholder during bring-up).
