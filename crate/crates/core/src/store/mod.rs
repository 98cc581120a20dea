//! Canonical rating schema, dataset import/export, session persistence and
//! append-only logs.

mod dataset;
mod events;
mod log;
mod record;
mod session;

pub use dataset::{
    export_csv, export_dataset, export_jsonl, import_dataset, import_reader, write_rejects,
    ColumnMapping, DatasetFormat, Field, ImportOutcome, Reject, Source, CSV_COLUMNS,
};
pub use events::{EventKind, EventLog, EventRecord};
pub use log::JsonlLog;
pub use record::{format_timestamp, now_millis, DgEntry, RatingRecord, RecordKey};
pub use session::{DeviceDeclaration, InjectedFault, SessionState, SessionStore};
