import os
import sys

THREAD_VARIABLES = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS')


def pin_threads(argv: list[str], environ=os.environ) -> None:
    """Fix the BLAS thread count; must run before numpy is imported."""
    threads = '1' if '--reproducible' in argv else environ.get('INET_THREADS')
    if threads:
        for name in THREAD_VARIABLES:
            environ[name] = threads


if __name__ == '__main__':
    pin_threads(sys.argv[1:])

    from instantiation_net.app import main

    sys.exit(main())
