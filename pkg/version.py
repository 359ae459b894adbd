version = '0.1.0a1'

required_versions = {'pyyaml': '>=5.1',
                     'numpy': '>=1.20',
                     'scipy': '>=1.7',
                     'mpmath': '>=1.2'}

test_versions = {'pytest': '>=6.0',
                 'hypothesis': '>=6.0'}

dependency_links = []
