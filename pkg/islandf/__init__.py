'''Module global properties'''
__url__ = 'https://github.com/human3/islandf'
__version__ = '0.3'
