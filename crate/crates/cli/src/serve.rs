use std::sync::Arc;

use anyhow::Context;
use sigtriage_server::{router, AppState};

use crate::config::FileConfig;
use crate::files::open_service;
use crate::{Failure, ServeArgs};

pub fn run(a: ServeArgs, file: &FileConfig) -> Result<(), Failure> {
    let service = open_service(&a.files)?;
    let bind = a.bind.or_else(|| file.serve.bind.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.or(file.serve.port).unwrap_or(8080);
    let ui = a.ui.or_else(|| file.serve.ui.clone());
    if a.admin_token.is_none() {
        tracing::warn!("no admin token set; export and report routes are disabled");
    }
    let app = router(Arc::new(AppState::new(service, a.admin_token)), ui);

    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((bind.as_str(), port))
            .await
            .with_context(|| format!("binding {bind}:{port}"))?;
        let addr = listener.local_addr()?;
        // Scripts and tests read the bound port from this line.
        println!("listening on http://{addr}");
        tracing::info!(%addr, "serving annotation queue");
        sigtriage_server::serve(listener, app, shutdown_signal()).await?;
        tracing::info!("stopped");
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM. In-flight requests finish first; every
/// acknowledged label is already synced, so nothing else needs flushing.
async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
