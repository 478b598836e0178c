from setuptools import setup

setup(
    name='LidarMix',
    description='Point cloud semantic segmentation with alternating 2D '
                'projections and a numpy autodiff core.',
    version='0.1dev',
    license='MIT License',
    long_description=open('README.md').read(),
    packages=[
        'LidarMix',
        'LidarMix.util',
        'LidarMix.ingest',
        'LidarMix.spatial',
        'LidarMix.tensor',
        'LidarMix.projection',
        'LidarMix.model',
        'LidarMix.train'
    ],
    package_dir={
        'LidarMix': 'LidarMix'
    },
    python_requires='>=3.8',
    install_requires=[
        'argh>=0.31',
        'attrs>=21.3',
        'numba>=0.57',
        'numpy>=1.22',
        'openpyxl>=3.0',
        'pandas>=1.4',
        'PyYAML>=6.0',
        'scipy>=1.8'
    ],
    entry_points={
        'console_scripts': [
            'lidarmix=LidarMix.cli:main'
        ]
    }
)
