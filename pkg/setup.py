#!/usr/bin/env python
"""mddpm - setup.py file"""
import re
from setuptools import setup, find_packages

_version_re = re.compile(r"__version__\s=\s'(.*)'")


def main():
    """mddpm - setup.py file"""

    with open('README.md', encoding="utf-8") as read_me:
        long_description = read_me.read()

    with open('mddpm/__init__.py', 'r') as f:
        version = _version_re.search(f.read()).group(1)

    setup(
        name='mddpm',
        version=version,
        description='Multi-conditioned low-pass guided DDPM sampling on procedural phantoms',
        long_description=long_description,
        long_description_content_type='text/markdown',
        license='MIT',
        packages=['mddpm_cli']+find_packages(exclude=['tests', 'examples*']),
        include_package_data=True,
        python_requires='>=3.8',
        install_requires=['numpy', 'scipy', 'torch', 'pyyaml', 'jsonlines'],
        extras_require={'test': ['pytest']},
        keywords='diffusion ddpm guidance phantom ssim frechet',
        entry_points={
            'console_scripts': [
                'mddpm=mddpm_cli.__main__:main'
            ]
        },
        classifiers=[
            'Development Status :: 4 - Beta',
            'Intended Audience :: Science/Research',
            'Topic :: Scientific/Engineering :: Image Processing',
            'License :: OSI Approved :: MIT License',
            'Programming Language :: Python :: 3'
        ]
    )

if __name__ == '__main__':
    main()
