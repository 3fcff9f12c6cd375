# Baire index engine
