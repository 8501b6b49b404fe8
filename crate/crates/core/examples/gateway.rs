//! Starts the HTTP gateway on an ephemeral port, sends it a few requests
//! and prints the replies and the final stats.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use agentreuse::harness::config::Config;
use agentreuse::harness::server::{serve_on, Gateway};
use agentreuse::plancache::ReusePipeline;

fn http(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> String {
    let mut s = TcpStream::connect(addr).expect("connect");
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .expect("write");
    let mut out = String::new();
    s.read_to_string(&mut out).expect("read");
    out.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or(out)
}

fn main() -> agentreuse::Result<()> {
    let config = Config::default();
    let backends = config.backends()?;
    let pipeline = ReusePipeline::new(Arc::new(config.cache(&backends)?), backends.planner)
        .with_tools(Arc::new(config.tools()?));
    let gateway = Arc::new(Gateway::new(pipeline, None));

    let rt = tokio::runtime::Runtime::new().expect("runtime");
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).expect("bind");
    let addr = listener.local_addr().expect("addr");
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = rt.spawn(serve_on(gateway, listener, async {
        let _ = stopped.await;
    }));
    println!("gateway on http://{addr}");

    for body in [
        r#"{"id":"a","text":"Book a ticket from Hefei to Beijing for the day after tomorrow","reusable":false}"#,
        r#"{"id":"b","text":"Book a ticket from Changsha to Shanghai for tomorrow","reusable":true}"#,
        r#"{"id":"c","text":"hello there, how are you","reusable":false}"#,
    ] {
        println!("POST /v1/request -> {}", http(addr, "POST", "/v1/request", body));
    }
    println!("GET /v1/stats -> {}", http(addr, "GET", "/v1/stats", ""));

    let _ = stop.send(());
    rt.block_on(server).expect("join")?;
    Ok(())
}
