import os

# no config.yaml of the working copy leaks into the tests
os.environ['FARMSIM_CONFIG_DIR'] = os.path.dirname(os.path.abspath(__file__))
os.environ.pop('FARMSIM_CONFIG', None)
