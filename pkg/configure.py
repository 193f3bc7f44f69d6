#!/usr/bin/env python

import os
import sys
import json


INFO = {
    'version': '0.1.0',
    }


def main():
    "Run functions specified on the command line"
    if len(sys.argv) <= 1:
        raise SystemExit("no command(s) specified")
    cmds = sys.argv[1:]
    if '-h' in cmds or '--help' in cmds:
        raise SystemExit("usage: " + sys.argv[0] + " <func-name> [<func-name>]")
    glbs = globals()
    for cmd in cmds:
        if cmd not in glbs:
            raise SystemExit(cmd + " not found")
    for cmd in cmds:
        if callable(glbs[cmd]):
            glbs[cmd]()
        else:
            raise SystemExit(cmd + " not callable")


def metadata(path="pysizing/metadata.json"):
    """Build a metadata file."""
    md = {}
    md.update(INFO)
    md['python'] = sys.version.split()[0]
    try:
        import tables as tb
        md['hdf5'] = tb.get_hdf5_version()
    except ImportError:
        md['hdf5'] = None

    with open(path, 'w') as f:
        json.dump(md, f, indent=2, sort_keys=True)

    return md


def final_message(success=True):
    if success:
        return

    metadata = None
    mdpath = os.path.join('pysizing', 'metadata.json')
    if os.path.exists(mdpath):
        with open(mdpath) as f:
            metadata = json.load(f)
    if metadata is not None:
        msg = "\n\nCURRENT METADATA:\n"
        for k, v in sorted(metadata.items()):
            msg += "  {0} = {1}\n".format(k, repr(v))
        print(msg[:-1])

    msg = ("\n\nUSAGE: python setup.py <setuptools-args>\n\n"
           "pysizing needs NumPy, SciPy, PyTables, requests and backoff at run time, and an\n"
           "ngspice binary on the path (or named by PYSIZING_ENGINE) to simulate.\n")
    print(msg)


def setup():
    from setuptools import setup as core_setup
    scripts = [os.path.join('scripts', f) for f in os.listdir('scripts')]
    scripts = [s for s in scripts if (os.name == 'nt' and s.endswith('.bat')) or
                                     (os.name != 'nt' and not s.endswith('.bat'))]
    packages = ['pysizing', 'pysizing.sim', 'pysizing.agent', 'pysizing.bench']
    pack_dir = {
        'pysizing': 'pysizing',
        'pysizing.sim': 'pysizing/sim',
        'pysizing.agent': 'pysizing/agent',
        'pysizing.bench': 'pysizing/bench',
        }
    pack_data = {
        'pysizing': ['*.json'],
        'pysizing.bench': ['data/*.lib', 'data/*/*.sp', 'data/*/*.json'],
        }
    setup_kwargs = {
        "name": "pysizing",
        "version": INFO['version'],
        "description": 'Analog circuit sizing with proposal engines in the simulation loop',
        "author": 'PySizing Development Team',
        "packages": packages,
        "package_dir": pack_dir,
        "package_data": pack_data,
        "scripts": scripts,
        "python_requires": '>=3.7',
        "install_requires": ['numpy', 'scipy', 'tables', 'requests', 'backoff>=2.0'],
        "extras_require": {'fast_json': ['simplejson'], 'plots': ['matplotlib'],
                           'test': ['pytest']},
        }
    rtn = core_setup(**setup_kwargs)


if __name__ == "__main__":
    main()
