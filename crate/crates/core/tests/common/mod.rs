#![allow(dead_code)]

use std::net::SocketAddr;

use agentreuse::harness::config::Config;
use agentreuse::harness::corpus::load_corpus;
use agentreuse::Request;
use axum::Router;

pub const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

pub fn corpus() -> Vec<Request> {
    load_corpus(format!("{DATA}/corpus.jsonl")).unwrap()
}

pub fn default_config() -> Config {
    Config::default()
}

/// A local HTTP service; stops when dropped.
pub struct Service {
    pub addr: SocketAddr,
    _rt: tokio::runtime::Runtime,
}

impl Service {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

pub fn spawn(router: Router) -> Service {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, router).await.unwrap() });
    Service { addr, _rt: rt }
}

/// An address nothing listens on.
pub fn closed_port() -> SocketAddr {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap()
}
