//! Binary "hit vs. non-hit" lyric classification built from three parts:
//!
//! * a gated fusion classifier ([`sfl`]) that modulates a dense text
//!   embedding with a sigmoid gate computed from four lyrical structure
//!   features, trained with Adam on analytic gradients;
//! * a from-scratch random forest ([`forest`]) over the concatenated
//!   embedding + structure features, with Gini-based feature importances;
//! * an evaluation suite ([`metrics`]) centred on probability quality:
//!   accuracy, macro F1, MCC, Brier score, log loss, expected calibration
//!   error, ROC/AUC and precision-recall/AP.
//!
//! [`features`] derives the four structure features (rhyme density, lexical
//! diversity, pronoun ratio, popularity) from raw lyrics. [`data`] handles
//! dataset files, cluster-to-binary label reframing, stratified splits and a
//! synthetic benchmark generator. [`experiment`] wires everything into the
//! batch ablation driver behind the `sfl` binary.
//!
//! Every random decision flows from explicit `u64` seeds through ChaCha8
//! streams, so equal configuration implies byte-identical outputs.

pub mod accum;
pub mod data;
pub mod experiment;
pub mod features;
pub mod forest;
pub mod metrics;
pub mod sfl;
