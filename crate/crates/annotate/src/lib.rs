//! Annotation service. Raters receive span and verdict tasks over HTTP; every
//! submission lands in an append-only event log from which canonical
//! annotation files are exported.

pub mod http;
pub mod store;

pub use http::{router, serve, AppState};
pub use store::{
    Event, Export, ExportOptions, SpanInput, State, Store, StoreError, StoreOptions, TaskState, TaskStatus,
    TaskView,
};
