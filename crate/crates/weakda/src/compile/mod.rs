//! Compilers from extended models to plain machines.

mod absence;
mod broadcast;
mod last;
mod rendezvous;
mod three_phase;

pub use absence::{
    ad_idle, ad_payload, ad_phase, ad_view, child_label, compile_absence_detection, AdRaw, AdView,
    CompiledAbsenceDetection, Dist,
};
pub use broadcast::{
    compile_weak_broadcast, wb_idle, wb_payload, wb_phase, wb_view, CompiledWeakBroadcast, WbRaw, WbView,
};
pub use last::{
    core_only, current, last_parts, product_parts, product_with, remembered, with_last_state, wrap_last, CommitMap, LastState,
    Product,
};
pub use rendezvous::{compile_rendezvous, rv_view, rv_wait, CompiledRendezvous, RvRaw, RvView};
pub use three_phase::{check_three_phase, PhaseViolation};
