import logging

logging.getLogger("psaes").setLevel(logging.ERROR)
