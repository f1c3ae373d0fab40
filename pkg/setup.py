"""A setuptools based setup module for arionet.

See:
https://packaging.python.org/en/latest/distributing.html
"""

from setuptools import setup, find_packages
from codecs import open
from os import path

here = path.abspath(path.dirname(__file__))

with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='arionet',  # Required

    # Keep in step with arionet/__init__.py
    version='0.1.0',  # Required

    description='Self-supervised birdsong representation toolkit',  # Required

    long_description=long_description,  # Optional
    long_description_content_type='text/markdown',  # Optional

    url='https://github.com/arionet/arionet',  # Optional
    author='arionet contributors',  # Optional

    classifiers=[  # Optional
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Multimedia :: Sound/Audio :: Analysis',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Operating System :: OS Independent'
    ],

    keywords='birdsong chromagram contrastive transformer bioacoustics',

    packages=find_packages(exclude=['.vscode', 'doc', 'tests', 'demos']),

    # numpy and scipy do the signal processing and the training maths,
    # scikit-learn the downstream classifiers, pandas/openpyxl the reports
    install_requires=['numpy>=1.20', 'scipy', 'pandas', 'matplotlib',
                      'seaborn', 'openpyxl', 'scikit-learn', 'tqdm'],
    python_requires='>=3.8',  # Optional

    entry_points={  # Optional
        'console_scripts': [
            'arionet=arionet.cliapp:main',
        ],
    },

    project_urls={  # Optional
        'Bug Reports': 'https://github.com/arionet/arionet/issues',
        'Source': 'https://github.com/arionet/arionet/',
    },
)
