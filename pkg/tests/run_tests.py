#!/usr/bin/env python3
"""
Main test runner for the padlab test suite.
Run all tests or specific test modules.
"""

import unittest
import sys
import os

# Add parent directory and the functional tests to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), 'functional_tests')))


def run_all_tests(verbosity=2):
    """Run all test suites, including the slow ordering checks"""
    loader = unittest.TestLoader()
    start_dir = os.path.join(os.path.dirname(__file__), 'functional_tests')
    suite = loader.discover(start_dir, pattern='test_*.py')

    runner = unittest.TextTestRunner(verbosity=verbosity)
    result = runner.run(suite)

    return result.wasSuccessful()


def run_specific_tests(test_name, verbosity=2):
    """Run tests from a specific module or class"""
    loader = unittest.TestLoader()
    suite = loader.loadTestsFromName(test_name)

    runner = unittest.TextTestRunner(verbosity=verbosity)
    result = runner.run(suite)

    return result.wasSuccessful()


def print_usage():
    """Print usage information"""
    print("padlab Test Suite")
    print("=" * 70)
    print("\nUsage:")
    print("  python run_tests.py                      # Run all tests")
    print("  python run_tests.py pbc                  # Run one module")
    print("  python run_tests.py orderings            # Run the slow ordering checks")
    print("  python run_tests.py orderings.padding    # Run one ordering group")
    print("\nModules: " + ", ".join(sorted(TEST_MAP)))
    print("Ordering groups: " + ", ".join(sorted(ORDERING_GROUPS)))
    print()


TEST_MAP = {
    'tensorcore': 'test_tensorcore',
    'padmodes': 'test_padmodes',
    'pbc': 'test_pbc',
    'featnet': 'test_featnet',
    'probe': 'test_probe',
    'richness': 'test_richness',
    'pnm': 'test_pnm',
    'config': 'test_config_file',
    'harness': 'test_harness',
    'cli': 'test_cli',
    'orderings': 'test_orderings',
}

ORDERING_GROUPS = {
    'padding': 'test_orderings.TestPaddingOrdering',
    'resolution': 'test_orderings.TestResolutionOrdering',
    'pbc': 'test_orderings.TestPbcCorrection',
    'boundaries': 'test_orderings.TestBoundaryCount',
    'depth': 'test_orderings.TestDepthOrdering',
    'determinism': 'test_orderings.TestDeterminism',
}


if __name__ == '__main__':
    if len(sys.argv) > 1:
        if sys.argv[1] in ['--help', '-h']:
            print_usage()
            sys.exit(0)

        test_name = sys.argv[1]
        if test_name.startswith('orderings.') and test_name[len('orderings.'):] in ORDERING_GROUPS:
            print(f"\nRunning {test_name} checks...\n")
            success = run_specific_tests(ORDERING_GROUPS[test_name[len('orderings.'):]])
        elif test_name in TEST_MAP:
            print(f"\nRunning {test_name} tests...\n")
            success = run_specific_tests(TEST_MAP[test_name])
        else:
            print(f"Unknown test module: {test_name}")
            print_usage()
            sys.exit(1)
    else:
        # Run all tests
        print("\nRunning all tests...\n")
        success = run_all_tests()

    sys.exit(0 if success else 1)
