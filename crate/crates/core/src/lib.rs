pub mod digest;
pub mod graph;
pub mod frontend;
pub mod cpt;
pub mod tokenizer;
pub mod context;
pub mod gateway;
pub mod prompts;
pub mod verdict;
pub mod relation;
pub mod composition;
pub mod sandbox;
pub mod utilization;
pub mod trace;
pub mod corpus;
