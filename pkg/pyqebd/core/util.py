import concurrent.futures as cf


def concurrent_map(func, items, thread_pool_executor=None, max_workers=4):
    """Apply ``func`` to every item in a worker pool, keeping input order.

    ``thread_pool_executor`` is a `concurrent.futures.ThreadPoolExecutor`
    class, or any callable with its ``(max_workers=...)`` signature and
    context-manager protocol. Results are placed by index, so the output
    does not depend on completion order.
    """
    items = list(items)
    if max_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    executor = thread_pool_executor if thread_pool_executor is not None else (
        cf.ThreadPoolExecutor
    )
    results = [None] * len(items)
    with executor(max_workers=max_workers) as pool:
        futures = {pool.submit(func, item): i for i, item in enumerate(items)}
        for future in cf.as_completed(futures):
            results[futures[future]] = future.result()
    return results
