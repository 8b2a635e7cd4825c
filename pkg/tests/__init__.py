# Enable running tests via both:
# - python -m unittest discover -s tests -p "test_*.py"
# - python -m unittest tests.test_xxx
