use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

static SIGNALLED: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_: libc::c_int) {
    SIGNALLED.store(true, Ordering::SeqCst);
}

/// Flag raised on the first SIGINT or SIGTERM.
pub fn stop_flag() -> Arc<AtomicBool> {
    let handler = on_signal as extern "C" fn(libc::c_int) as libc::sighandler_t;
    // SAFETY: the handler only stores to an atomic, which is async-signal-safe.
    unsafe {
        libc::signal(libc::SIGINT, handler);
        libc::signal(libc::SIGTERM, handler);
    }
    let flag = Arc::new(AtomicBool::new(false));
    let f = Arc::clone(&flag);
    thread::spawn(move || {
        while !SIGNALLED.load(Ordering::SeqCst) {
            thread::sleep(Duration::from_millis(50));
        }
        log::info!("signal received, shutting down");
        f.store(true, Ordering::SeqCst);
    });
    flag
}
