//! Criterion benchmark harness for the core operations; see benches/.
