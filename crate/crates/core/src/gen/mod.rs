//! Test packet generation and the reference checker.

pub mod bits;
pub mod check;
pub mod corpus;
pub mod generate;
pub mod plan;

pub use check::{check_packet, CheckResult, DecodedValue, StructuralFailure, Verdict};
pub use corpus::{read_jsonl, to_jsonl, write_jsonl};
pub use generate::{
    default_negative_count, generate_negative, generate_positive, packet_seed, Expectation, GenError, Generator, Mutation,
    NegativeBatch, NegativeTarget, Skipped, TestPacket, DEFAULT_POSITIVES, RETRY_BUDGET,
};
